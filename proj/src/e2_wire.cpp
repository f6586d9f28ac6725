#include "oran/e2_wire.hpp"

#include <charconv>
#include <cmath>
#include <limits>

namespace oran {

std::string_view to_string(MessageType t) {
  switch (t) {
    case MessageType::SubscriptionRequest: return "SubscriptionRequest";
    case MessageType::SubscriptionResponse: return "SubscriptionResponse";
    case MessageType::Indication: return "Indication";
    case MessageType::Control: return "Control";
    case MessageType::ControlAck: return "ControlAck";
    case MessageType::XAppRegister: return "XAppRegister";
    case MessageType::XAppRoute: return "XAppRoute";
  }
  return "?";
}

std::string_view to_string(SliceId s) {
  switch (s) {
    case SliceId::embb: return "embb";
    case SliceId::mtc: return "mtc";
    case SliceId::urllc: return "urllc";
  }
  return "?";
}

std::optional<SliceId> parse_slice_id(std::string_view s) {
  for (auto id : kAllSlices) {
    if (to_string(id) == s) return id;
  }
  return std::nullopt;
}

std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::RR: return "RR";
    case Policy::WF: return "WF";
    case Policy::PF: return "PF";
  }
  return "?";
}

std::optional<Policy> parse_policy(std::string_view s) {
  for (auto p : kAllPolicies) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

ParseError::ParseError(const std::string& what, std::size_t row, std::size_t field)
    : std::runtime_error(what), row_(row), field_(field) {}

bool is_valid_identifier(std::string_view id) {
  if (id.size() > kMaxIdLength) return false;
  for (char c : id) {
    if (c == ',' || c == ';' || c == ':' || c == '\n' || c == '\r') return false;
  }
  return true;
}

void require_identifier(std::string_view id) {
  if (!is_valid_identifier(id)) {
    throw WireError("invalid identifier '" + std::string(id) + "'");
  }
}

std::vector<std::string_view> split(std::string_view s, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

// ---------------------------------------------------------------------------
// Framing

namespace {

bool known_type(std::uint8_t code) { return code >= 1 && code <= 7; }

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

}  // namespace

void encode_frame_into(const E2Frame& frame, std::vector<std::uint8_t>& out) {
  require_identifier(frame.source_id);
  require_identifier(frame.dest_id);
  if (frame.payload.size() > kMaxPayload) {
    throw WireError("payload of " + std::to_string(frame.payload.size()) + " bytes exceeds 2^24");
  }
  if (!known_type(static_cast<std::uint8_t>(frame.type))) {
    throw WireError("unknown message type");
  }
  const std::size_t body =
      kMinBody + frame.source_id.size() + frame.dest_id.size() + frame.payload.size();
  out.reserve(out.size() + 4 + body);
  out.push_back(static_cast<std::uint8_t>(body >> 24));
  out.push_back(static_cast<std::uint8_t>(body >> 16));
  out.push_back(static_cast<std::uint8_t>(body >> 8));
  out.push_back(static_cast<std::uint8_t>(body));
  out.push_back(static_cast<std::uint8_t>(frame.type));
  out.push_back(static_cast<std::uint8_t>(frame.source_id.size()));
  out.insert(out.end(), frame.source_id.begin(), frame.source_id.end());
  out.push_back(static_cast<std::uint8_t>(frame.dest_id.size()));
  out.insert(out.end(), frame.dest_id.begin(), frame.dest_id.end());
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
}

std::vector<std::uint8_t> encode_frame(const E2Frame& frame) {
  std::vector<std::uint8_t> out;
  encode_frame_into(frame, out);
  return out;
}

std::optional<DecodedFrame> decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) return std::nullopt;
  const std::size_t body = read_be32(bytes.data());
  if (body < kMinBody || body > kMaxBody) {
    throw WireError("length prefix " + std::to_string(body) + " out of range");
  }
  // The type byte is checked as soon as it is available so a corrupt stream
  // fails fast instead of waiting for a bogus body length.
  if (bytes.size() >= 5 && !known_type(bytes[4])) {
    throw WireError("unknown message type " + std::to_string(bytes[4]));
  }
  if (bytes.size() < 4 + body) return std::nullopt;

  const auto* p = bytes.data() + 4;
  const auto* end = p + body;
  DecodedFrame out;
  out.frame.type = static_cast<MessageType>(*p++);

  const std::size_t src_len = *p++;
  if (src_len > kMaxIdLength || static_cast<std::size_t>(end - p) < src_len + 1) {
    throw WireError("length prefix mismatch: source id overruns frame");
  }
  out.frame.source_id.assign(reinterpret_cast<const char*>(p), src_len);
  p += src_len;

  const std::size_t dst_len = *p++;
  if (dst_len > kMaxIdLength || static_cast<std::size_t>(end - p) < dst_len) {
    throw WireError("length prefix mismatch: dest id overruns frame");
  }
  out.frame.dest_id.assign(reinterpret_cast<const char*>(p), dst_len);
  p += dst_len;

  if (!is_valid_identifier(out.frame.source_id) || !is_valid_identifier(out.frame.dest_id)) {
    throw WireError("invalid identifier in frame");
  }
  out.frame.payload.assign(reinterpret_cast<const char*>(p), static_cast<std::size_t>(end - p));
  if (out.frame.payload.size() > kMaxPayload) {
    throw WireError("payload exceeds 2^24 bytes");
  }
  out.consumed = 4 + body;
  return out;
}

void StreamDecoder::feed(std::span<const std::uint8_t> chunk) {
  // Compact once the consumed prefix dominates the buffer.
  if (pos_ > 0 && pos_ * 2 >= buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
  buf_.insert(buf_.end(), chunk.begin(), chunk.end());
}

std::optional<E2Frame> StreamDecoder::next() {
  auto decoded = decode_frame(std::span<const std::uint8_t>(buf_).subspan(pos_));
  if (!decoded) return std::nullopt;
  pos_ += decoded->consumed;
  if (pos_ == buf_.size()) {
    buf_.clear();
    pos_ = 0;
  }
  return std::move(decoded->frame);
}

// ---------------------------------------------------------------------------
// String service model

namespace {

void append_fixed3(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 3);
  out.append(buf, res.ptr);
}

template <typename Int>
Int parse_uint_field(std::string_view f, std::size_t row, std::size_t field) {
  Int v{};
  if (f.empty() || f.front() == '-' || f.front() == '+') {
    throw ParseError("row " + std::to_string(row) + ", field " + std::to_string(field) +
                         ": expected nonnegative integer, got '" + std::string(f) + "'",
                     row, field);
  }
  auto res = std::from_chars(f.data(), f.data() + f.size(), v);
  if (res.ec != std::errc{} || res.ptr != f.data() + f.size()) {
    throw ParseError("row " + std::to_string(row) + ", field " + std::to_string(field) +
                         ": expected nonnegative integer, got '" + std::string(f) + "'",
                     row, field);
  }
  return v;
}

double parse_real_field(std::string_view f, std::size_t row, std::size_t field) {
  double v = 0.0;
  auto fail = [&] {
    return ParseError("row " + std::to_string(row) + ", field " + std::to_string(field) +
                          ": expected nonnegative real, got '" + std::string(f) + "'",
                      row, field);
  };
  if (f.empty() || f.front() == '-' || f.front() == '+') throw fail();
  auto res = std::from_chars(f.data(), f.data() + f.size(), v, std::chars_format::fixed);
  if (res.ec != std::errc{} || res.ptr != f.data() + f.size() || !std::isfinite(v)) throw fail();
  return v;
}

void require_payload_identifier(std::string_view id) {
  if (!is_valid_identifier(id)) {
    throw WireError("identifier '" + std::string(id) + "' contains a delimiter or is too long");
  }
}

}  // namespace

std::string format_kpm_row(const KpmRecord& r) {
  require_payload_identifier(r.bs_id);
  std::string out;
  out.reserve(64);
  out += std::to_string(r.timestamp_ms);
  out += ',';
  out += r.bs_id;
  out += ',';
  out += to_string(r.slice);
  out += ',';
  append_fixed3(out, r.dl_throughput_mbps);
  out += ',';
  out += std::to_string(r.tx_packets);
  out += ',';
  out += std::to_string(r.buffer_bytes);
  out += ',';
  out += std::to_string(r.prb_alloc);
  out += ',';
  append_fixed3(out, r.offered_load_mbps);
  return out;
}

KpmRecord parse_kpm_fields(const std::vector<std::string_view>& f, std::size_t row) {
  if (f.size() != kKpmFields) {
    throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(kKpmFields) +
                         " fields, got " + std::to_string(f.size()),
                     row, 0);
  }
  KpmRecord r;
  {
    auto ts = f[0];
    auto res = std::from_chars(ts.data(), ts.data() + ts.size(), r.timestamp_ms);
    if (ts.empty() || res.ec != std::errc{} || res.ptr != ts.data() + ts.size()) {
      throw ParseError("row " + std::to_string(row) + ", field 1: bad timestamp '" +
                           std::string(ts) + "'",
                       row, 1);
    }
  }
  if (!is_valid_identifier(f[1])) {
    throw ParseError("row " + std::to_string(row) + ", field 2: bad identifier", row, 2);
  }
  r.bs_id = std::string(f[1]);
  auto slice = parse_slice_id(f[2]);
  if (!slice) {
    throw ParseError("row " + std::to_string(row) + ", field 3: unknown slice '" +
                         std::string(f[2]) + "'",
                     row, 3);
  }
  r.slice = *slice;
  r.dl_throughput_mbps = parse_real_field(f[3], row, 4);
  r.tx_packets = parse_uint_field<std::uint64_t>(f[4], row, 5);
  r.buffer_bytes = parse_uint_field<std::uint64_t>(f[5], row, 6);
  r.prb_alloc = parse_uint_field<std::uint32_t>(f[6], row, 7);
  r.offered_load_mbps = parse_real_field(f[7], row, 8);
  return r;
}

std::string serialize_kpm_payload(std::span<const KpmRecord> records) {
  std::string out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i > 0) out += '\n';
    out += format_kpm_row(records[i]);
  }
  return out;
}

std::vector<KpmRecord> parse_kpm_payload(std::string_view s) {
  std::vector<KpmRecord> out;
  if (s.empty()) return out;
  auto rows = split(s, '\n');
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.push_back(parse_kpm_fields(split(rows[i], ','), i + 1));
  }
  return out;
}

std::uint32_t ControlDirective::prb_sum() const {
  std::uint32_t sum = 0;
  for (const auto& s : slices) sum += s.prb_count;
  return sum;
}

std::string serialize_control_payload(const ControlDirective& d) {
  require_payload_identifier(d.bs_id);
  std::string out = d.bs_id;
  for (auto id : kAllSlices) {
    out += ';';
    out += to_string(id);
    out += ':';
    out += std::to_string(d[id].prb_count);
    out += ':';
    out += to_string(d[id].policy);
  }
  return out;
}

ControlDirective parse_control_payload(std::string_view s) {
  auto parts = split(s, ';');
  if (parts.size() != 1 + kNumSlices) {
    throw ParseError("control directive needs bs_id and 3 slice entries, got " +
                     std::to_string(parts.size()) + " fields");
  }
  ControlDirective d;
  if (parts[0].empty() || !is_valid_identifier(parts[0])) {
    throw ParseError("control directive: bad bs_id", 0, 1);
  }
  d.bs_id = std::string(parts[0]);
  std::array<bool, kNumSlices> seen{};
  for (std::size_t i = 1; i < parts.size(); ++i) {
    auto triple = split(parts[i], ':');
    if (triple.size() != 3) {
      throw ParseError("control directive entry '" + std::string(parts[i]) +
                           "' is not slice:prb:policy",
                       0, i + 1);
    }
    auto slice = parse_slice_id(triple[0]);
    if (!slice) throw ParseError("unknown slice '" + std::string(triple[0]) + "'", 0, i + 1);
    if (seen[index_of(*slice)]) {
      throw ParseError("slice '" + std::string(triple[0]) + "' appears twice", 0, i + 1);
    }
    seen[index_of(*slice)] = true;
    auto policy = parse_policy(triple[2]);
    if (!policy) throw ParseError("unknown policy '" + std::string(triple[2]) + "'", 0, i + 1);
    d[*slice] = SliceControl{parse_uint_field<std::uint32_t>(triple[1], 0, i + 1), *policy};
  }
  return d;
}

std::string serialize_subscription_payload(const SubscriptionRequest& s) {
  require_payload_identifier(s.bs_id);
  return s.bs_id + ";" + std::to_string(s.period_ms);
}

SubscriptionRequest parse_subscription_payload(std::string_view s) {
  auto parts = split(s, ';');
  if (parts.size() != 2 || parts[0].empty() || !is_valid_identifier(parts[0])) {
    throw ParseError("subscription payload must be 'bs_id;period_ms'");
  }
  return {std::string(parts[0]), parse_uint_field<std::uint32_t>(parts[1], 0, 2)};
}

std::string serialize_subscription_response(const SubscriptionResponse& s) {
  require_payload_identifier(s.bs_id);
  return s.bs_id + ";" + std::to_string(s.period_ms) + (s.accepted ? ";accepted" : ";rejected");
}

SubscriptionResponse parse_subscription_response(std::string_view s) {
  auto parts = split(s, ';');
  if (parts.size() != 3 || !is_valid_identifier(parts[0]) ||
      (parts[2] != "accepted" && parts[2] != "rejected")) {
    throw ParseError("subscription response must be 'bs_id;period_ms;accepted|rejected'");
  }
  return {std::string(parts[0]), parse_uint_field<std::uint32_t>(parts[1], 0, 2),
          parts[2] == "accepted"};
}

}  // namespace oran
