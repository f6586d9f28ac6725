#include "oran/ric.hpp"

#include <chrono>
#include <sstream>

namespace oran {

std::string_view to_string(NodeKind k) { return k == NodeKind::e2_node ? "e2_node" : "xapp"; }

std::optional<NodeKind> parse_node_kind(std::string_view s) {
  if (s == "e2_node") return NodeKind::e2_node;
  if (s == "xapp") return NodeKind::xapp;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

bool Nib::insert(NibEntry entry) {
  std::unique_lock lock(mu_);
  auto id = entry.node_id;
  return entries_.emplace(std::move(id), std::move(entry)).second;
}

bool Nib::erase(const std::string& node_id) {
  std::unique_lock lock(mu_);
  return entries_.erase(node_id) > 0;
}

std::optional<NibEntry> Nib::find(const std::string& node_id) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(node_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<NibEntry> Nib::query(NodeKind kind) const {
  std::shared_lock lock(mu_);
  std::vector<NibEntry> out;
  for (const auto& [id, e] : entries_) {
    if (e.kind == kind) out.push_back(e);
  }
  return out;
}

std::size_t Nib::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

// ---------------------------------------------------------------------------

RicCore::RicCore(Outbound out, Clock clock) : out_(std::move(out)), clock_(std::move(clock)) {}

std::int64_t RicCore::now() const {
  if (clock_) return clock_();
  using namespace std::chrono;
  return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
}

void RicCore::reply(ConnId conn, MessageType type, const std::string& dest, std::string payload) {
  if (out_) out_(conn, E2Frame{type, std::string(kRicId), dest, std::move(payload)});
}

void RicCore::on_connect(ConnId conn) {
  std::lock_guard lock(mu_);
  conn_node_.erase(conn);
}

void RicCore::on_disconnect(ConnId conn) {
  std::lock_guard lock(mu_);
  auto it = conn_node_.find(conn);
  if (it == conn_node_.end()) return;
  const std::string id = it->second;
  conn_node_.erase(it);
  node_conn_.erase(id);
  auto entry = nib_.find(id);
  nib_.erase(id);
  if (!entry || entry->kind != NodeKind::xapp) return;

  // An xApp's subscriptions die with it; tell the nodes to stop reporting.
  for (auto s = subs_.begin(); s != subs_.end();) {
    if (s->first.first != id) {
      ++s;
      continue;
    }
    const std::string bs = s->first.second;
    s = subs_.erase(s);
    if (auto bc = node_conn_.find(bs); bc != node_conn_.end() && out_) {
      out_(bc->second, E2Frame{MessageType::SubscriptionRequest, id, bs,
                               serialize_subscription_payload({bs, 0})});
    }
  }
}

void RicCore::on_frame(ConnId conn, const E2Frame& f) {
  std::lock_guard lock(mu_);
  if (f.type == MessageType::XAppRegister && f.dest_id == kRicId) {
    handle_register(conn, f);
    return;
  }
  auto it = conn_node_.find(conn);
  if (it == conn_node_.end() || it->second != f.source_id) {
    ++stats_.unroutable;
    return;
  }
  const std::string& self = it->second;

  switch (f.type) {
    case MessageType::SubscriptionRequest:
      handle_subscription(conn, self, f);
      return;
    case MessageType::Indication:
      route(f, NodeKind::xapp);
      return;
    case MessageType::ControlAck:
      route(f, NodeKind::xapp);
      return;
    case MessageType::Control:
      route(f, NodeKind::e2_node);
      return;
    case MessageType::XAppRoute:
      if (f.dest_id == kRicId) {
        if (f.payload == "stats") reply(conn, MessageType::XAppRoute, self, dump_locked());
        return;
      }
      if (auto src = nib_.find(self); !src || src->kind != NodeKind::xapp) {
        ++stats_.unroutable;
        return;
      }
      route(f, NodeKind::xapp);
      return;
    default:
      ++stats_.unroutable;
      return;
  }
}

void RicCore::handle_register(ConnId conn, const E2Frame& f) {
  auto parts = split(f.payload, ';');
  auto kind = parse_node_kind(parts[0]);
  const bool already = conn_node_.count(conn) > 0;
  if (!kind || f.source_id.empty() || already) {
    ++stats_.rejected_registrations;
    reply(conn, MessageType::XAppRegister, f.source_id, "rejected;malformed");
    return;
  }
  std::string caps = parts.size() > 1 ? std::string(f.payload.substr(parts[0].size() + 1)) : "";
  if (!nib_.insert(NibEntry{f.source_id, *kind, now(), std::move(caps)})) {
    ++stats_.rejected_registrations;
    reply(conn, MessageType::XAppRegister, f.source_id, "rejected;duplicate");
    return;
  }
  conn_node_[conn] = f.source_id;
  node_conn_[f.source_id] = conn;
  reply(conn, MessageType::XAppRegister, f.source_id, "accepted");

  if (*kind == NodeKind::e2_node) {
    // Resume reporting for subscriptions that outlived a reconnect.
    for (const auto& [key, period] : subs_) {
      if (key.second != f.source_id || !node_conn_.count(key.first)) continue;
      out_(conn, E2Frame{MessageType::SubscriptionRequest, key.first, key.second,
                         serialize_subscription_payload({key.second, period})});
    }
  }
}

void RicCore::handle_subscription(ConnId conn, const std::string& xapp, const E2Frame& f) {
  auto self = nib_.find(xapp);
  SubscriptionRequest req;
  bool ok = self && self->kind == NodeKind::xapp;
  try {
    req = parse_subscription_payload(f.payload);
  } catch (const ParseError&) {
    ok = false;
  }
  auto bs = ok ? nib_.find(req.bs_id) : std::nullopt;
  if (!ok || !bs || bs->kind != NodeKind::e2_node) {
    ++stats_.subscriptions_rejected;
    reply(conn, MessageType::SubscriptionResponse, xapp,
          serialize_subscription_response({is_valid_identifier(req.bs_id) ? req.bs_id : "", req.period_ms, false}));
    return;
  }
  const auto key = std::make_pair(xapp, req.bs_id);
  if (req.period_ms == 0) {
    subs_.erase(key);
  } else {
    subs_[key] = req.period_ms;
  }
  ++stats_.subscriptions_accepted;
  reply(conn, MessageType::SubscriptionResponse, xapp,
        serialize_subscription_response({req.bs_id, req.period_ms, true}));
  out_(node_conn_.at(req.bs_id), E2Frame{MessageType::SubscriptionRequest, xapp, req.bs_id,
                                         serialize_subscription_payload(req)});
}

void RicCore::route(const E2Frame& f, NodeKind dest_kind) {
  ++stats_.accepted;
  auto dest = node_conn_.find(f.dest_id);
  auto entry = dest == node_conn_.end() ? std::nullopt : nib_.find(f.dest_id);
  if (!entry || entry->kind != dest_kind) {
    ++stats_.dropped;
    return;
  }
  ++stats_.delivered;
  out_(dest->second, f);
}

std::vector<Subscription> RicCore::subscriptions() const {
  std::lock_guard lock(mu_);
  std::vector<Subscription> out;
  for (const auto& [key, period] : subs_) out.push_back({key.first, key.second, period});
  return out;
}

RicStats RicCore::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

std::string RicCore::stats_dump() const {
  std::lock_guard lock(mu_);
  return dump_locked();
}

std::string RicCore::dump_locked() const {
  std::ostringstream os;
  os << "accepted " << stats_.accepted << '\n'
     << "delivered " << stats_.delivered << '\n'
     << "dropped " << stats_.dropped << '\n'
     << "unroutable " << stats_.unroutable << '\n'
     << "rejected_registrations " << stats_.rejected_registrations << '\n'
     << "subscriptions_accepted " << stats_.subscriptions_accepted << '\n'
     << "subscriptions_rejected " << stats_.subscriptions_rejected << '\n';
  for (auto kind : {NodeKind::e2_node, NodeKind::xapp}) {
    for (const auto& e : nib_.query(kind)) {
      os << "nib " << to_string(kind) << ' ' << e.node_id << " since=" << e.connected_since_ms
         << " caps=" << e.capabilities << '\n';
    }
  }
  for (const auto& [key, period] : subs_) {
    os << "sub " << key.first << " -> " << key.second << " every " << period << " ms\n";
  }
  return os.str();
}

}  // namespace oran
