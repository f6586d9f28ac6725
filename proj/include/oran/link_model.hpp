#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>

namespace oran {

inline constexpr int kMinCqi = 1;
inline constexpr int kMaxCqi = 15;

// Bits carried by one PRB in one 1 ms TTI, indexed by CQI. Shaped after the
// LTE CQI efficiency curve and calibrated so 50 PRBs give ~75 Mbps at CQI 15
// and ~18 Mbps at CQI 7.
inline constexpr std::array<std::uint32_t, kMaxCqi + 1> kBitsPerPrb{
    0, 40, 62, 100, 160, 230, 300, 360, 500, 640, 740, 900, 1050, 1220, 1380, 1500};

class LinkModelError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

constexpr std::uint32_t bits_per_prb(int cqi) {
  if (cqi < kMinCqi || cqi > kMaxCqi) throw LinkModelError("cqi out of range 1..15");
  return kBitsPerPrb[static_cast<std::size_t>(cqi)];
}

/// Bytes deliverable in one TTI on `n_prbs` PRBs at `cqi`.
constexpr std::uint64_t capacity_bytes(int cqi, std::uint32_t n_prbs) {
  return std::uint64_t{n_prbs} * bits_per_prb(cqi) / 8;
}

}  // namespace oran
