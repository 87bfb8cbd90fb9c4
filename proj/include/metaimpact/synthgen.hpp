#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "metaimpact/tape.hpp"

namespace metaimpact {

struct SyntheticScenario {
  std::uint64_t seed = 1;
  std::int64_t start_day = 15706;  // 2013-01-01
  std::size_t n_days = 20;

  // Metaorder traders. Each trader alternates metaorders and idle gaps of
  // min_gap + Exp(1/rate).
  std::size_t n_traders = 300;
  double metaorders_per_trader_per_day = 0.5;
  double t_inact_seconds = 3600.0;
  double min_gap_seconds = 7200.0;

  // |Q| ~ lognormal(log q_median, q_sigma), clipped to [q_min, q_max].
  double q_median = 2.0;
  double q_sigma = 1.5;
  double q_min = 0.1;
  double q_max = 1e5;
  // Execution speed mu = |Q|/T ~ lognormal, volume units per second.
  double mu_median = 0.01;
  double mu_sigma = 1.0;

  // "uniform": children uniform on [min_children, max_children].
  // "table": buckets {1}, {2..4}, {5..9}, {10..max_children} drawn with
  // child_table probabilities, uniform inside a bucket.
  std::string child_count_mode = "uniform";
  std::size_t min_children = 5;
  std::size_t max_children = 50;
  std::array<double, 4> child_table{0.61, 0.29, 0.065, 0.035};
  // "linear" (equal spacing with jitter) or "front_loaded" (t_k = T*u_k^2).
  std::string schedule = "linear";
  double time_jitter = 0.2;  // fraction of the nominal child spacing
  double size_jitter = 0.2;  // relative child size spread

  // Impact law: during execution a metaorder contributes s*Yt_d*c^delta,
  // c = own volume executed so far, with Yt_d = Y_d*sigma_d/V_D^delta and
  // Y_d = y0 + sigma_y*eta_d. After the last fill the contribution relaxes
  // toward pi_inf of its peak with time constant decay_multiple*T.
  double y0 = 0.9;
  double sigma_y = 0.35;
  double delta = 0.5;
  double pi_inf = 0.0;
  double decay_multiple = 1.0;
  double min_decay_seconds = 30.0;
  // "own_flow": superposition of per-metaorder kernels driven by each
  // metaorder's own executed volume. "aggregate": a single concave response
  // Yt_d*sign(F)*|F|^delta to the net decaying flow F of all metaorders.
  std::string response = "own_flow";

  // Daily volatility sigma_d = sigma_daily*lognormal(dispersion).
  double sigma_daily = 0.03;
  double sigma_dispersion = 0.3;
  // "calibrated": diffusive noise variance per day is sigma_d^2 minus the
  // realized variance of the impact component (floored at
  // noise_floor*sigma_d^2). "fixed": noise_sigma per sqrt(day); 0 = none.
  std::string noise_mode = "calibrated";
  double noise_sigma = 0.0;
  double noise_floor = 0.05;

  // "independent" or "long_memory" (signs of fractional Gaussian noise with
  // H = 1 - gamma/2, in metaorder start order).
  std::string sign_mode = "independent";
  double gamma = 0.4;

  // Background traders: one-trade participants with unique ids. Sizes are
  // lognormal, redrawn above background_size_max; keeping the cap below
  // q_min leaves the metaorder volume bins free of zero-impact singletons.
  double base_daily_volume = 500.0;
  double background_size_median = 0.02;
  double background_size_sigma = 0.5;
  double background_size_max = 0.08;
  bool background_impact = false;

  double initial_price = 800.0;
  double spread = 2e-4;  // relative; 0 disables quotes
  int price_exponent = -8;
  int volume_exponent = -8;
  std::int64_t tick = 1000;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

std::string scenario_to_json(const SyntheticScenario& s);
// Unknown or ill-typed fields raise ConfigError naming the field.
SyntheticScenario scenario_from_json(std::string_view text);

inline constexpr std::uint64_t kUnassigned = std::numeric_limits<std::uint64_t>::max();

struct PlantedMetaOrder {
  std::uint64_t id = 0;  // ordered like the segmenter's output
  TraderId trader_id = kNoTrader;
  int sign = 1;
  std::int64_t volume = 0;  // scaled
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;
  std::uint32_t n_children = 0;
  bool background = false;
  double prefactor = 0.0;     // Yt in force for this metaorder
  double planted_peak = 0.0;  // prefactor * |Q|^delta
};

struct PlantedDay {
  std::int64_t day = 0;
  double y = 0.0;      // Y_d
  double sigma = 0.0;  // sigma_d target
  double v_d = 0.0;    // generated volume, volume units
  double y_tilde = 0.0;
  double noise_sigma = 0.0;  // per sqrt(day)
  double rv_impact = 0.0;
};

struct GroundTruth {
  std::vector<std::uint64_t> trade_metaorder;  // by tape index
  std::vector<PlantedMetaOrder> metaorders;
  std::vector<PlantedDay> days;
  double mean_prefactor = 0.0;  // |Q|-weighted over non-background metaorders
};

struct SyntheticOutput {
  Tape tape;
  GroundTruth truth;
};

SyntheticOutput generate(const SyntheticScenario& scenario);

// Independent random stream per (component name, index).
std::mt19937_64 substream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

// Fractional Gaussian noise, unit variance, by circulant embedding.
std::vector<double> fractional_gaussian_noise(std::size_t n, double hurst, std::mt19937_64& rng);

void write_ground_truth_csv(const Tape& tape, const GroundTruth& truth, const std::string& path);
void write_planted_metaorders_csv(const GroundTruth& truth, int volume_exponent, const std::string& path);
void write_planted_days_csv(const GroundTruth& truth, const std::string& path);

}  // namespace metaimpact
