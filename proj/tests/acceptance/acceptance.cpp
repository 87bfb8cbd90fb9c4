// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <sys/resource.h>
#include <sys/wait.h>
#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "metaimpact/estimators.hpp"
#include "metaimpact/oracle.hpp"
#include "metaimpact/parallel.hpp"
#include "metaimpact/pipeline.hpp"
#include "metaimpact/synthgen.hpp"
#include "metaimpact/tape_io.hpp"

namespace fs = std::filesystem;
using namespace metaimpact;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path work_dir;

fs::path fresh(const std::string& name) {
  const fs::path p = work_dir / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::uint64_t> labels_of(const MetaOrderSet& set, std::size_t n) {
  std::vector<std::uint64_t> labels(n, kUnassigned);
  for (const MetaOrder& m : set.orders()) {
    for (std::uint32_t c : set.children(m)) labels[c] = m.id;
  }
  return labels;
}

double json_number(const nlohmann::json& fits, const char* fit, const char* key) {
  if (!fits.contains(fit) || !fits[fit].contains(key) || !fits[fit][key].is_number()) return std::nan("");
  return fits[fit][key].get<double>();
}

const EventStudyCurve* bucket(const PipelineResult& r, const std::string& name) {
  for (const EventStudyCurve& c : r.events) {
    if (c.bucket == name) return &c;
  }
  return nullptr;
}

// Fast executions with many children: high signal to noise per metaorder and
// a small last-child offset.
SyntheticScenario sqrt_scenario() {
  SyntheticScenario sc;
  sc.n_days = 102;
  sc.n_traders = 400;
  sc.metaorders_per_trader_per_day = 2.5;
  sc.mu_median = 1.0;
  sc.mu_sigma = 0.5;
  sc.min_children = 40;
  sc.max_children = 100;
  sc.t_inact_seconds = 60;
  sc.min_gap_seconds = 120;
  return sc;
}

RunConfig config_for(const SyntheticScenario& sc) {
  RunConfig cfg;
  cfg.segmentation.t_inact_seconds = sc.t_inact_seconds;
  return cfg;
}

Outcome segmentation_oracle() {
  double elapsed = 0.0;
  std::size_t failures = 0, metaorders = 0, min_m = SIZE_MAX, max_m = 0;
  for (std::uint64_t k = 0; k < 50; ++k) {
    SyntheticScenario sc;
    sc.seed = 1000 + k;
    sc.n_days = 2;
    sc.n_traders = 150 + 44 * k;
    sc.metaorders_per_trader_per_day = 2.0;
    sc.base_daily_volume = 5;
    sc.t_inact_seconds = 600 + 60 * static_cast<double>(k % 5);
    sc.min_gap_seconds = 2 * sc.t_inact_seconds;
    const SyntheticOutput out = generate(sc);
    SegmentationConfig cfg;
    cfg.t_inact_seconds = sc.t_inact_seconds;
    const auto t0 = Clock::now();
    const MarketIndex index(out.tape);
    const Segmentation seg = segment(out.tape, index, cfg);
    elapsed += seconds_since(t0);
    const std::size_t m = out.truth.metaorders.size();
    metaorders += m;
    min_m = std::min(min_m, m);
    max_m = std::max(max_m, m);
    if (labels_of(seg.metaorders, out.tape.size()) != out.truth.trade_metaorder) ++failures;
  }
  const bool sizes_ok = min_m >= 1000 && max_m <= 10000;
  return {failures == 0 && elapsed < 10.0 && sizes_ok,
          fmt::format("50 scenarios, {}..{} metaorders each ({} total), {} with label mismatches, "
                      "segmentation {:.2f} s (limit 10 s)",
                      min_m, max_m, metaorders, failures, elapsed)};
}

Outcome square_root_recovery() {
  const auto t0 = Clock::now();
  const SyntheticScenario sc = sqrt_scenario();
  const SyntheticOutput out = generate(sc);
  const PipelineResult r = run_pipeline(out.tape, config_for(sc), kStageImpact);
  const double elapsed = seconds_since(t0);
  const double delta = json_number(r.fits, "peak_impact", "exponent");
  const double pref = json_number(r.fits, "peak_impact", "prefactor");
  const double decades =
      std::log10(json_number(r.fits, "peak_impact", "x_max") / json_number(r.fits, "peak_impact", "x_min"));
  const double rel = pref / out.truth.mean_prefactor - 1.0;
  std::size_t planted = 0;
  for (const PlantedMetaOrder& m : out.truth.metaorders) planted += m.background ? 0 : 1;
  const bool ok = delta >= 0.45 && delta <= 0.55 && std::fabs(rel) <= 0.10 && decades >= 3.0 && elapsed < 120.0 &&
                  planted >= 100000;
  return {ok, fmt::format("{} metaorders, delta {:.4f} in [0.45, 0.55], prefactor {:.4g} vs planted {:.4g} "
                          "({:+.1f}%, limit 10%), {:.2f} decades of Q (>= 3), {:.1f} s (limit 120 s)",
                          planted, delta, pref, out.truth.mean_prefactor, 100 * rel, decades, elapsed)};
}

Outcome trajectory_identity() {
  SyntheticScenario sc = sqrt_scenario();
  sc.noise_mode = "fixed";
  sc.noise_sigma = 0.0;
  const SyntheticOutput out = generate(sc);
  const PipelineResult r = run_pipeline(out.tape, config_for(sc), kStageImpact);
  if (!r.trajectory) return {false, "no trajectory comparison: " + r.notes.dump()};
  const TrajectoryComparison& t = *r.trajectory;
  double worst_r = 0.0;
  for (std::size_t j = 0; j < t.r.size(); ++j) {
    if (t.n[j] == 0 || t.r[j] + 1e-12 < 0.1) continue;
    if (std::fabs(t.path_mean[j] / t.curve_mean[j] - 1.0) >= t.max_relative_deviation - 1e-15) worst_r = t.r[j];
  }
  return {t.max_relative_deviation <= 0.05,
          fmt::format("noise-free tape, max |path(r)/curve(rQ) - 1| over r >= 0.1 is {:.4f} at r = {:.3f} "
                      "(limit 0.05)",
                      t.max_relative_deviation, worst_r)};
}

Outcome y_ratio_recovery() {
  SyntheticScenario sc;
  sc.n_days = 300;
  sc.n_traders = 50;
  sc.metaorders_per_trader_per_day = 2.0;
  sc.mu_median = 1.0;
  sc.mu_sigma = 0.5;
  sc.min_children = 40;
  sc.max_children = 100;
  sc.t_inact_seconds = 60;
  sc.min_gap_seconds = 120;
  sc.base_daily_volume = 200;
  const SyntheticOutput out = generate(sc);
  const PipelineResult r = run_pipeline(out.tape, config_for(sc), kStageLiquidity);
  const double mean = json_number(r.fits, "y_ratio", "Y0");
  const double std = json_number(r.fits, "y_ratio", "Sigma_Y");
  const double ks = json_number(r.fits, "y_ratio", "ks");
  const double n = json_number(r.fits, "y_ratio", "n");
  const bool ok = std::fabs(mean - sc.y0) <= 0.05 && std::fabs(std - sc.sigma_y) <= 0.05 && ks < 0.05 && n >= 300;
  return {ok, fmt::format("{} days, Y0 {:.4f} vs 0.9 (+-0.05), Sigma_Y {:.4f} vs 0.35 (+-0.05), KS {:.4f} (< 0.05)",
                          n, mean, std, ks)};
}

SyntheticScenario isolation_scenario() {
  SyntheticScenario sc;
  sc.n_days = 20;
  sc.n_traders = 300;
  sc.metaorders_per_trader_per_day = 2.0;
  sc.mu_median = 0.05;
  sc.mu_sigma = 0.5;
  sc.min_children = 10;
  sc.max_children = 40;
  sc.t_inact_seconds = 600;
  sc.min_gap_seconds = 1200;
  return sc;
}

Outcome isolation_decomposition() {
  SyntheticScenario a = isolation_scenario();
  a.pi_inf = 0.0;
  a.sign_mode = "independent";
  const PipelineResult ra = run_pipeline(generate(a).tape, config_for(a), kStageEventStudy);

  // Every metaorder keeps a third of its peak; the informed bucket rides the
  // correlated flow on top of that.
  SyntheticScenario b = isolation_scenario();
  b.pi_inf = 1.0 / 3.0;
  b.sign_mode = "long_memory";
  const PipelineResult rb = run_pipeline(generate(b).tape, config_for(b), kStageEventStudy);

  const EventStudyCurve* iso = bucket(ra, "isolated");
  const EventStudyCurve* inf = bucket(rb, "informed");
  const EventStudyCurve* iso_b = bucket(rb, "isolated");
  if (iso == nullptr || inf == nullptr) return {false, "isolated or informed bucket is empty"};
  const double x = iso->permanent / iso->peak;
  const double y = inf->permanent / inf->peak;
  return {x < 0.1 && y > 0.5,
          fmt::format("independent signs, pi_inf 0: isolated post/peak {:.3f} (< 0.1, n = {}); long-memory signs, "
                      "pi_inf 1/3: informed post/peak {:.3f} (> 0.5, n = {}), isolated {:.3f}",
                      x, iso->n, y, inf->n, iso_b ? iso_b->permanent / iso_b->peak : std::nan(""))};
}

Outcome surface_null() {
  // Volume is dominated by small non-impacting background trades, so mu_V
  // spans two decades without other metaorders swamping each cell.
  SyntheticScenario sc;
  sc.n_days = 150;
  sc.n_traders = 100;
  sc.metaorders_per_trader_per_day = 2.0;
  sc.q_median = 10;
  sc.q_sigma = 1.2;
  sc.q_min = 1;
  sc.q_max = 1000;
  sc.mu_median = 0.6;
  sc.mu_sigma = 2.0;
  sc.min_children = 10;
  sc.max_children = 40;
  sc.t_inact_seconds = 600;
  sc.min_gap_seconds = 1200;
  sc.base_daily_volume = 40000;
  sc.background_size_median = 0.7;
  sc.background_size_max = 0.95;
  sc.noise_mode = "fixed";
  sc.noise_sigma = 0.0;
  sc.sigma_y = 0.0;
  sc.sigma_dispersion = 0.0;
  RunConfig cfg = config_for(sc);
  cfg.surface_binning.q_per_decade = 4;
  cfg.surface_binning.muv_per_decade = 2;
  cfg.surface_binning.n_min = 300;
  const PipelineResult r = run_pipeline(generate(sc).tape, cfg, kStageSurface);
  const double dprime = json_number(r.fits, "surface", "delta_prime");
  if (!r.collapse) return {false, fmt::format("delta' {:.4f}, no collapse available", dprime)};
  const bool ok = dprime >= -0.1 && dprime <= 0.1 && r.collapse->max_relative_deviation <= 0.10;
  return {ok, fmt::format("delta' {:.4f} in [-0.1, 0.1]; exec/sqrt(imbalance) within {:.1f}% of the pooled value "
                          "over {} cells (limit 10%)",
                          dprime, 100 * r.collapse->max_relative_deviation, r.collapse->n_cells)};
}

Outcome estimator_oracles() {
  // ACF against a textbook double loop.
  std::mt19937_64 rng(7);
  std::vector<int> signs(1000);
  int run = 1;
  for (int& s : signs) {
    if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.3) run = -run;
    s = run;
  }
  const std::size_t max_lag = 200;
  const AcfFit acf = sign_acf(signs, max_lag);
  const double n = static_cast<double>(signs.size());
  double mean = 0.0;
  for (int s : signs) mean += s;
  mean /= n;
  double var = 0.0;
  for (int s : signs) var += (s - mean) * (s - mean);
  var /= n;
  double acf_diff = 0.0;
  for (std::size_t l = 0; l <= max_lag; ++l) {
    double c = 0.0;
    for (std::size_t i = 0; i + l < signs.size(); ++i) c += (signs[i] - mean) * (signs[i + l] - mean);
    c /= (n - static_cast<double>(l)) * var;
    acf_diff = std::max(acf_diff, std::fabs(c - acf.correlation[l]));
  }

  // Windowed imbalance and active counts against the naive oracle.
  SyntheticScenario sc;
  sc.n_days = 2;
  sc.n_traders = 150;
  sc.metaorders_per_trader_per_day = 2.0;
  sc.base_daily_volume = 200;
  const SyntheticOutput out = generate(sc);
  const OracleStats oracle = brute_force_stats(out.tape, out.truth);
  const MarketIndex index(out.tape);
  std::size_t imbalance_mismatch = 0;
  for (std::size_t m = 0; m < oracle.metaorders.size(); ++m) {
    const OracleMetaOrder& om = oracle.metaorders[m];
    const auto span = static_cast<double>(om.t_end - om.t_start);
    if (market_imbalance(index, {om.t_start, om.t_end}) != oracle.execution_imbalance[m]) ++imbalance_mismatch;
    if (market_imbalance(index, {om.t_start, om.t_start + std::llround(10.0 * span)}) !=
        oracle.isolation_imbalance[m]) {
      ++imbalance_mismatch;
    }
  }
  SegmentationConfig seg_cfg;
  seg_cfg.t_inact_seconds = sc.t_inact_seconds;
  const MetaOrderSet set = segment(out.tape, index, seg_cfg).metaorders;
  const auto active = active_metaorder_series(set, 60.0);
  bool active_same = active.size() == oracle.active.size();
  for (std::size_t k = 0; active_same && k < active.size(); ++k) {
    active_same = active[k].time == oracle.active[k].time && active[k].n_buy == oracle.active[k].n_buy &&
                  active[k].n_sell == oracle.active[k].n_sell && active[k].volume_buy == oracle.active[k].volume_buy &&
                  active[k].volume_sell == oracle.active[k].volume_sell;
  }

  // Hill on Pareto(1.5) by inversion.
  std::mt19937_64 prng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> pareto(100000);
  for (double& x : pareto) x = std::pow(1.0 - u(prng), -1.0 / 1.5);
  const TailFit tail = hill_tail(pareto, 1.0);

  const bool ok =
      acf_diff <= 1e-12 && imbalance_mismatch == 0 && active_same && std::fabs(tail.hill_alpha - 1.5) <= 0.05;
  return {ok, fmt::format("ACF max diff {:.2e} (n = 1000, limit 1e-12); {} imbalance windows, {} mismatches; "
                          "active series {} points, {}; Hill alpha {:.4f} vs 1.5 (+-0.05, 1e5 draws)",
                          acf_diff, 2 * oracle.metaorders.size(), imbalance_mismatch, active.size(),
                          active_same ? "identical" : "different", tail.hill_alpha)};
}

Outcome determinism() {
  SyntheticScenario sc;
  sc.n_days = 5;
  const SyntheticOutput out = generate(sc);
  RunConfig cfg = config_for(sc);
  const fs::path a = fresh("workers1"), b = fresh("workers8");
  parallel::set_workers(1);
  write_outputs(out.tape, run_pipeline(out.tape, cfg), cfg, a);
  parallel::set_workers(8);
  write_outputs(out.tape, run_pipeline(out.tape, cfg), cfg, b);
  parallel::set_workers(0);
  std::size_t files = 0, differ = 0;
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) names.insert(e.path().filename().string());
  for (const auto& e : fs::directory_iterator(b)) names.insert(e.path().filename().string());
  for (const std::string& f : names) {
    ++files;
    if (!fs::exists(a / f) || !fs::exists(b / f) || slurp(a / f) != slurp(b / f)) ++differ;
  }
  return {differ == 0 && files > 0,
          fmt::format("{} trades, full pipeline, {} output files, {} differ between 1 and 8 workers", out.tape.size(),
                      files, differ)};
}

std::string self_path;

struct ChildRun {
  int code = -1;
  double seconds = 0.0;
  double peak_gb = 0.0;
};

// Runs a command through a freshly executed helper (this binary in --measure
// mode), so the peak RSS reported belongs to the command alone and not to
// pages copied from this large process at fork time.
ChildRun measured(const std::string& cmd) {
  const std::string line = fmt::format("{} --measure {}", self_path, cmd);
  FILE* pipe = popen(line.c_str(), "r");
  if (pipe == nullptr) return {};
  char buf[256] = {};
  const bool got = std::fgets(buf, sizeof buf, pipe) != nullptr;
  pclose(pipe);
  ChildRun r;
  long kb = 0;
  if (!got || std::sscanf(buf, "%d %lf %ld", &r.code, &r.seconds, &kb) != 3) return {};
  r.peak_gb = static_cast<double>(kb) / (1024.0 * 1024.0);
  return r;
}

int measure_main(char** argv) {
  const auto t0 = Clock::now();
  const pid_t pid = fork();
  if (pid == 0) {
    const int devnull = open("/dev/null", O_WRONLY);
    dup2(devnull, STDOUT_FILENO);
    execvp(argv[0], argv);
    _exit(127);
  }
  int status = 0;
  rusage usage{};
  wait4(pid, &status, 0, &usage);
  std::printf("%d %.6f %ld\n", WIFEXITED(status) ? WEXITSTATUS(status) : -1, seconds_since(t0), usage.ru_maxrss);
  return 0;
}

Outcome performance(const std::string& cli) {
  SyntheticScenario sc;
  sc.n_days = 215;
  sc.n_traders = 1000;
  sc.metaorders_per_trader_per_day = 1.0;
  const fs::path dir = fresh("perf");
  std::size_t trades = 0;
  {
    const SyntheticOutput out = generate(sc);
    trades = out.tape.size();
    save_tape(dir / "tape.csv", out.tape, TapeFormat::Csv);
  }
  const ChildRun ingest =
      measured(fmt::format("{} ingest -i {} -o {}", cli, (dir / "tape.csv").string(), (dir / "ingest").string()));
  const ChildRun impact = measured(fmt::format("{} impact --t-inact {} -i {} -o {}", cli, sc.t_inact_seconds,
                                               (dir / "ingest" / "tape.bin").string(), (dir / "impact").string()));
  fs::remove(dir / "tape.csv");
  const int rc1 = ingest.code, rc2 = impact.code;
  const double elapsed = ingest.seconds + impact.seconds;
  const double peak_gb = std::max(ingest.peak_gb, impact.peak_gb);
  const bool ok = rc1 == 0 && rc2 == 0 && trades >= 10'000'000 && elapsed < 60.0 && peak_gb < 4.0;
  return {ok, fmt::format("{} trades from CSV, ingest + segment + impact {:.1f} s (limit 60 s), peak resident "
                          "{:.2f} GB (limit 4 GB), {} worker(s), exit codes {}/{}",
                          trades, elapsed, peak_gb, parallel::workers(), rc1, rc2)};
}

Outcome descriptive_statistics() {
  SyntheticScenario sc;
  sc.n_days = 110;
  sc.n_traders = 1000;
  sc.metaorders_per_trader_per_day = 1.0;
  sc.child_count_mode = "table";
  sc.max_children = 30;
  sc.base_daily_volume = 0;
  sc.sign_mode = "long_memory";
  sc.gamma = 0.4;
  const PipelineResult r = run_pipeline(generate(sc).tape, config_for(sc), kStageAcf);
  const ChildCountTable& t = *r.child_counts;
  double worst = 0.0;
  for (std::size_t b = 0; b < 4; ++b) worst = std::max(worst, std::fabs(t.fractions[b] - sc.child_table[b]));
  const double gamma = r.acf && r.acf->gamma ? *r.acf->gamma : std::nan("");
  const std::size_t n = r.segmentation.metaorders.size();
  const bool ok = n >= 100000 && worst <= 0.01 && std::fabs(gamma - 0.4) <= 0.1;
  return {ok, fmt::format("{} metaorders, fractions {:.4f}/{:.4f}/{:.4f}/{:.4f} vs 0.61/0.29/0.065/0.035 "
                          "(worst {:.4f}, limit 0.01); gamma {:.4f} vs 0.4 (+-0.1)",
                          n, t.fractions[0], t.fractions[1], t.fractions[2], t.fractions[3], worst, gamma)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 2 && std::string(argv[1]) == "--measure") return measure_main(argv + 2);
  self_path = fs::canonical("/proc/self/exe").string();
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string cli = METAIMPACT_CLI;
  std::string dir = (fs::temp_directory_path() / "metaimpact_acceptance").string();
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--cli", cli, "Path to the metaimpact executable");
  app.add_option("--work-dir", dir, "Scratch directory");
  CLI11_PARSE(app, argc, argv);
  work_dir = dir;
  fs::create_directories(work_dir);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"segmentation oracle", segmentation_oracle},
      {"square-root recovery", square_root_recovery},
      {"trajectory identity", trajectory_identity},
      {"Y-ratio recovery", y_ratio_recovery},
      {"isolation decomposition", isolation_decomposition},
      {"surface null test", surface_null},
      {"estimator oracles", estimator_oracles},
      {"determinism", determinism},
      {"performance", [&] { return performance(cli); }},
      {"descriptive statistics", descriptive_statistics},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << fmt::format("{} {:>2} {}: {} [{:.1f} s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail,
                             seconds_since(t0))
              << std::flush;
  }
  fs::remove_all(work_dir);
  return failed == 0 ? 0 : 1;
}
