#pragma once

// E2-like wire protocol: length-prefixed binary frames whose payload is a
// plain string service model (KPM rows, control directives, subscriptions).
//
// Frame layout (all integers big-endian):
//   u32 body_len | u8 msg_type | u8 src_len | src | u8 dst_len | dst | payload
// body_len counts every byte after the prefix.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace oran {

enum class MessageType : std::uint8_t {
  SubscriptionRequest = 1,
  SubscriptionResponse = 2,
  Indication = 3,
  Control = 4,
  ControlAck = 5,
  XAppRegister = 6,
  XAppRoute = 7,
};

std::string_view to_string(MessageType t);

enum class SliceId : std::uint8_t { embb = 0, mtc = 1, urllc = 2 };
inline constexpr std::array<SliceId, 3> kAllSlices{SliceId::embb, SliceId::mtc, SliceId::urllc};
inline constexpr std::size_t kNumSlices = 3;

std::string_view to_string(SliceId s);
std::optional<SliceId> parse_slice_id(std::string_view s);
constexpr std::size_t index_of(SliceId s) { return static_cast<std::size_t>(s); }

enum class Policy : std::uint8_t { RR = 0, WF = 1, PF = 2 };
inline constexpr std::array<Policy, 3> kAllPolicies{Policy::RR, Policy::WF, Policy::PF};

std::string_view to_string(Policy p);
std::optional<Policy> parse_policy(std::string_view s);

/// Malformed or oversize frame, invalid identifier.
class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Payload string that does not follow its grammar. row/field are 1-based;
/// 0 means "not applicable".
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row = 0, std::size_t field = 0);
  std::size_t row() const { return row_; }
  std::size_t field() const { return field_; }

 private:
  std::size_t row_;
  std::size_t field_;
};

inline constexpr std::size_t kMaxIdLength = 64;
inline constexpr std::size_t kMaxPayload = std::size_t{1} << 24;
// Body bytes excluding payload: type + two length bytes + the ids.
inline constexpr std::size_t kMinBody = 3;
inline constexpr std::size_t kMaxBody = kMinBody + 2 * kMaxIdLength + kMaxPayload;

/// Identifiers are at most 64 bytes and exclude `,` `;` `:` and newlines.
bool is_valid_identifier(std::string_view id);
void require_identifier(std::string_view id);

struct E2Frame {
  MessageType type{MessageType::Indication};
  std::string source_id;
  std::string dest_id;
  std::string payload;

  friend bool operator==(const E2Frame&, const E2Frame&) = default;
};

std::vector<std::uint8_t> encode_frame(const E2Frame& frame);
/// Appends the encoding of `frame` to `out`.
void encode_frame_into(const E2Frame& frame, std::vector<std::uint8_t>& out);

struct DecodedFrame {
  E2Frame frame;
  std::size_t consumed{0};
};

/// Decodes the first frame in `bytes`. Returns nullopt when more bytes are
/// needed; throws WireError on an unknown type or inconsistent lengths.
std::optional<DecodedFrame> decode_frame(std::span<const std::uint8_t> bytes);

/// Reassembles frames from arbitrarily chunked stream input. One per
/// connection; not thread-safe.
class StreamDecoder {
 public:
  void feed(std::span<const std::uint8_t> chunk);
  /// Next complete frame, if any. Throws WireError on a corrupt stream.
  std::optional<E2Frame> next();
  std::size_t buffered() const { return buf_.size() - pos_; }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t pos_{0};
};

// ---------------------------------------------------------------------------
// String service model

struct KpmRecord {
  std::int64_t timestamp_ms{0};
  std::string bs_id;
  SliceId slice{SliceId::embb};
  double dl_throughput_mbps{0.0};
  std::uint64_t tx_packets{0};
  std::uint64_t buffer_bytes{0};
  std::uint32_t prb_alloc{0};
  double offered_load_mbps{0.0};

  friend bool operator==(const KpmRecord&, const KpmRecord&) = default;
};

inline constexpr std::size_t kKpmFields = 8;

/// One KPM row: `timestamp_ms,bs_id,slice_id,thr,tx_packets,buffer,prb,offered`
/// with reals at exactly three decimals.
std::string format_kpm_row(const KpmRecord& r);
/// Parses a row split into fields; `row` is only used for error messages.
KpmRecord parse_kpm_fields(const std::vector<std::string_view>& fields, std::size_t row);

std::string serialize_kpm_payload(std::span<const KpmRecord> records);
std::vector<KpmRecord> parse_kpm_payload(std::string_view s);

struct SliceControl {
  std::uint32_t prb_count{0};
  Policy policy{Policy::RR};

  friend bool operator==(const SliceControl&, const SliceControl&) = default;
};

struct ControlDirective {
  std::string bs_id;
  std::array<SliceControl, kNumSlices> slices{};  // indexed by SliceId

  SliceControl& operator[](SliceId s) { return slices[index_of(s)]; }
  const SliceControl& operator[](SliceId s) const { return slices[index_of(s)]; }
  std::uint32_t prb_sum() const;

  friend bool operator==(const ControlDirective&, const ControlDirective&) = default;
};

/// `bs_id;embb:prb:policy;mtc:prb:policy;urllc:prb:policy`
std::string serialize_control_payload(const ControlDirective& d);
ControlDirective parse_control_payload(std::string_view s);

/// Subscription request payload `bs_id;period_ms`. A period of 0 cancels.
struct SubscriptionRequest {
  std::string bs_id;
  std::uint32_t period_ms{0};

  friend bool operator==(const SubscriptionRequest&, const SubscriptionRequest&) = default;
};

std::string serialize_subscription_payload(const SubscriptionRequest& s);
SubscriptionRequest parse_subscription_payload(std::string_view s);

/// Subscription response payload `bs_id;period_ms;accepted|rejected`.
struct SubscriptionResponse {
  std::string bs_id;
  std::uint32_t period_ms{0};
  bool accepted{false};

  friend bool operator==(const SubscriptionResponse&, const SubscriptionResponse&) = default;
};

std::string serialize_subscription_response(const SubscriptionResponse& s);
SubscriptionResponse parse_subscription_response(std::string_view s);

/// Splits on a single-character delimiter, keeping empty fields.
std::vector<std::string_view> split(std::string_view s, char delim);

}  // namespace oran
