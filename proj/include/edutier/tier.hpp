#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "edutier/error.hpp"

namespace edutier {

// Performance tiers in their fixed class order. Index 0 (A) is also the
// tie-break winner wherever classifiers or votes tie.
enum class Tier : int { A = 0, B = 1, C = 2 };

inline constexpr std::size_t kTierCount = 3;
inline constexpr std::array<Tier, kTierCount> kAllTiers{Tier::A, Tier::B, Tier::C};

// Score bands: A >= 80, 60 <= B < 80, C < 60.
inline constexpr double kTierAMin = 80.0;
inline constexpr double kTierBMin = 60.0;

constexpr std::size_t tier_index(Tier t) { return static_cast<std::size_t>(t); }
constexpr Tier tier_from_index(std::size_t i) { return static_cast<Tier>(static_cast<int>(i)); }

constexpr char tier_char(Tier t) { return "ABC"[tier_index(t)]; }
inline std::string tier_name(Tier t) { return std::string(1, tier_char(t)); }

inline std::optional<Tier> parse_tier(std::string_view s) {
  if (s == "A" || s == "a") return Tier::A;
  if (s == "B" || s == "b") return Tier::B;
  if (s == "C" || s == "c") return Tier::C;
  return std::nullopt;
}

// A ranks highest; `tier_rank(A) > tier_rank(B) > tier_rank(C)`.
constexpr int tier_rank(Tier t) { return 2 - static_cast<int>(t); }

// Lower score bounds of tiers A and B; everything below `b_min` is C.
struct TierThresholds {
  double a_min = kTierAMin;
  double b_min = kTierBMin;
};

/// Maps a target-course score onto its tier. Scores strictly between 79 and
/// 80 fall into B: the band edges are read as half-open intervals.
inline Tier assign_tier(double score, const TierThresholds& th = {}) {
  if (!(score >= 0.0 && score <= 100.0)) {
    throw DataError("score out of range [0,100]: " + std::to_string(score));
  }
  if (!(th.b_min < th.a_min)) throw UsageError("tier thresholds must satisfy b_min < a_min");
  if (score >= th.a_min) return Tier::A;
  if (score >= th.b_min) return Tier::B;
  return Tier::C;
}

}  // namespace edutier
