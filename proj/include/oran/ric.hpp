#pragma once

// Near-real-time RIC: node information base, subscription table and frame
// routing between E2 nodes and xApps. RicCore owns no sockets; a transport
// (loopback bus or TCP server) feeds it frames and delivers what it emits.

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "oran/e2_wire.hpp"

namespace oran {

inline constexpr std::string_view kRicId = "ric";

using ConnId = std::uint64_t;

enum class NodeKind { e2_node, xapp };

std::string_view to_string(NodeKind k);
std::optional<NodeKind> parse_node_kind(std::string_view s);

struct NibEntry {
  std::string node_id;
  NodeKind kind{NodeKind::e2_node};
  std::int64_t connected_since_ms{0};
  std::string capabilities;

  friend bool operator==(const NibEntry&, const NibEntry&) = default;
};

/// In-process node information base. Concurrent readers, exclusive writers.
class Nib {
 public:
  /// Inserts unless the id is already live; returns false on duplicates.
  bool insert(NibEntry entry);
  bool erase(const std::string& node_id);
  std::optional<NibEntry> find(const std::string& node_id) const;
  /// Snapshot of entries of `kind`, sorted by node_id.
  std::vector<NibEntry> query(NodeKind kind) const;
  std::size_t size() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, NibEntry> entries_;
};

struct Subscription {
  std::string xapp_id;
  std::string bs_id;
  std::uint32_t report_period_ms{0};

  friend bool operator==(const Subscription&, const Subscription&) = default;
};

struct RicStats {
  std::uint64_t accepted{0};   // routable frames accepted from registered sources
  std::uint64_t delivered{0};
  std::uint64_t dropped{0};
  std::uint64_t rejected_registrations{0};
  std::uint64_t subscriptions_accepted{0};
  std::uint64_t subscriptions_rejected{0};
  std::uint64_t unroutable{0};  // frames from unregistered or spoofing connections
};

class RicCore {
 public:
  using Outbound = std::function<void(ConnId, const E2Frame&)>;
  using Clock = std::function<std::int64_t()>;

  explicit RicCore(Outbound out, Clock clock = {});

  void on_connect(ConnId conn);
  void on_frame(ConnId conn, const E2Frame& frame);
  void on_disconnect(ConnId conn);

  std::vector<NibEntry> query_nib(NodeKind kind) const { return nib_.query(kind); }
  std::vector<Subscription> subscriptions() const;
  RicStats stats() const;
  /// Plaintext dump: counters, NIB contents and subscriptions.
  std::string stats_dump() const;

 private:
  void handle_register(ConnId conn, const E2Frame& f);
  void handle_subscription(ConnId conn, const std::string& xapp, const E2Frame& f);
  void route(const E2Frame& f, NodeKind dest_kind);
  void reply(ConnId conn, MessageType type, const std::string& dest, std::string payload);
  std::int64_t now() const;
  std::string dump_locked() const;

  Outbound out_;
  Clock clock_;
  Nib nib_;
  mutable std::mutex mu_;  // guards everything below and serializes dispatch
  std::map<ConnId, std::string> conn_node_;  // connection -> registered id
  std::map<std::string, ConnId> node_conn_;
  std::map<std::pair<std::string, std::string>, std::uint32_t> subs_;  // (xapp, bs) -> period
  RicStats stats_{};
};

}  // namespace oran
