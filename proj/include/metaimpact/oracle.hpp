#pragma once

#include <cstdint>
#include <vector>

#include "metaimpact/impact.hpp"
#include "metaimpact/segmenter.hpp"
#include "metaimpact/synthgen.hpp"
#include "metaimpact/tape.hpp"

namespace metaimpact {

inline constexpr std::size_t kOracleMaxTrades = 100'000;

struct OracleConfig {
  double active_resolution_seconds = 60.0;
  std::size_t acf_max_lag = 100;
  std::size_t n_points = 41;
  double perm_lo_mult = 9.0;
  double perm_hi_mult = 10.0;
  double horizon_mult = 10.0;
};

// A labelled metaorder rebuilt from ground-truth labels alone.
struct OracleMetaOrder {
  std::uint64_t id = 0;
  int sign = 1;
  std::int64_t volume = 0;
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;
  std::vector<std::size_t> children;
};

struct OracleStats {
  std::vector<OracleMetaOrder> metaorders;         // ordered by label
  std::vector<std::int64_t> execution_imbalance;   // signed volume over [t_start, t_end]
  std::vector<std::int64_t> isolation_imbalance;   // over [t_start, t_start + horizon*T]
  std::vector<ActivePoint> active;                 // grid over [min t_start, max t_end]
  std::vector<double> sign_acf;                    // lags 0..max_lag (empty if too short or constant)
  std::vector<ImpactSummary> summaries;
};

// Naive reference statistics computed from labels, bypassing the segmenter
// and every prefix-sum structure. Refuses tapes above kOracleMaxTrades.
OracleStats brute_force_stats(const Tape& tape, const std::vector<std::uint64_t>& labels, const OracleConfig& cfg = {});

inline OracleStats brute_force_stats(const Tape& tape, const GroundTruth& truth, const OracleConfig& cfg = {}) {
  return brute_force_stats(tape, truth.trade_metaorder, cfg);
}

}  // namespace metaimpact
