#pragma once

#include <string>
#include <utility>
#include <vector>

#include "metaimpact/impact.hpp"
#include "metaimpact/segmenter.hpp"
#include "metaimpact/tape.hpp"

namespace metaimpact {

struct EventStudyConfig {
  double pre_mult = 1.0;    // window starts at t_start - pre_mult*T
  double post_mult = 10.0;  // and ends at t_end + post_mult*T
  std::size_t n_points = 41;  // grid points across the execution [0, 1]
  std::size_t n_min = 50;
  bool by_trend = true;
  bool by_q = false;
  bool by_mu = false;
  double q_per_decade = 1.0;
  double mu_per_decade = 1.0;
  void validate() const;
};

// Curve names, in output order. "ask" is the execution-side quote (best ask
// for buys, best bid for sells) and "bid" the opposite side; both are absent
// when the tape has no quotes. Flows are in units of the metaorder's |Q|.
inline constexpr const char* kEventCurves[] = {"price", "ask", "bid", "vwap", "flow_total", "flow_residual", "own"};

struct EventStudyCurve {
  std::string bucket;
  std::vector<double> grid;  // tau: 0 at the first fill, 1 at the last
  std::vector<std::pair<std::string, std::vector<double>>> curves;
  std::size_t n = 0;
  double peak = 0.0;       // price curve at tau = 1
  double permanent = 0.0;  // mean price curve over the last unit of tau

  const std::vector<double>* curve(const std::string& name) const;
};

// Buckets: "all", "trending"/"mean_reverting" (sign of the pre-window
// return), "isolated"/"informed" when labels are given, "q:<bin>", "mu:<bin>".
// Only T > 0 metaorders whose whole window lies inside the tape contribute;
// buckets with fewer than n_min members are omitted.
std::vector<EventStudyCurve> event_study(const Tape& tape, const MarketIndex& index, const MetaOrderSet& set,
                                         const EventStudyConfig& cfg, const Isolation* isolation = nullptr);

namespace reference {
std::vector<EventStudyCurve> event_study(const Tape& tape, const MetaOrderSet& set, const EventStudyConfig& cfg,
                                         const Isolation* isolation = nullptr);
}  // namespace reference

}  // namespace metaimpact
