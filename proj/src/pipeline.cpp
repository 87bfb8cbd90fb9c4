#include "metaimpact/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "metaimpact/error.hpp"
#include "metaimpact/parallel.hpp"
#include "metaimpact/report.hpp"

namespace metaimpact {

using nlohmann::json;

void RunConfig::validate() const {
  segmentation.validate();
  impact.validate();
  peak_binning.validate();
  surface_binning.validate();
  isolation.validate();
  event_study.validate();
  if (vol.bin_seconds <= 0) throw ConfigError("volatility bin must be positive");
  if (acf_max_lag == 0) throw ConfigError("acf max lag must be positive");
  if (acf_fit_min == 0 || acf_fit_max < acf_fit_min) throw ConfigError("acf fit range must satisfy 1 <= min <= max");
  if (!(hill_threshold > 0.0)) throw ConfigError("hill threshold must be positive");
  if (!(active_resolution_seconds > 0.0)) throw ConfigError("active resolution must be positive");
  if (profile_points < 2) throw ConfigError("profile points must be at least 2");
  if (!(trajectory_r_min >= 0.0 && trajectory_r_min <= 1.0)) throw ConfigError("trajectory r_min must be in [0, 1]");
  if (workers < 0) throw ConfigError("workers must be >= 0");
}

json RunConfig::to_json() const {
  return {
      {"inputs", inputs},
      {"segmentation",
       {{"t_inact_seconds", segmentation.t_inact_seconds},
        {"drop_mean_reverting", segmentation.drop_mean_reverting},
        {"reversal_starts_new", segmentation.reversal_starts_new}}},
      {"impact",
       {{"n_points", impact.n_points}, {"perm_lo_mult", impact.perm_lo_mult}, {"perm_hi_mult", impact.perm_hi_mult}}},
      {"peak_binning",
       {{"per_decade", peak_binning.per_decade},
        {"n_min", peak_binning.n_min},
        {"min_children", peak_binning.min_children}}},
      {"surface_binning",
       {{"q_per_decade", surface_binning.q_per_decade},
        {"muv_per_decade", surface_binning.muv_per_decade},
        {"n_min", surface_binning.n_min}}},
      {"isolation", {{"threshold", isolation.threshold}, {"horizon_mult", isolation.horizon_mult}}},
      {"event_study",
       {{"pre_mult", event_study.pre_mult},
        {"post_mult", event_study.post_mult},
        {"n_points", event_study.n_points},
        {"n_min", event_study.n_min},
        {"by_trend", event_study.by_trend},
        {"by_q", event_study.by_q},
        {"by_mu", event_study.by_mu},
        {"q_per_decade", event_study.q_per_decade},
        {"mu_per_decade", event_study.mu_per_decade}}},
      {"volatility", vol.name()},
      {"acf", {{"max_lag", acf_max_lag}, {"fit_lag_min", acf_fit_min}, {"fit_lag_max", acf_fit_max}}},
      {"hill_threshold", hill_threshold},
      {"active_resolution_seconds", active_resolution_seconds},
      {"profile_points", profile_points},
      {"trajectory_r_min", trajectory_r_min},
  };
}

ParsedTape load_inputs(const RunConfig& cfg, std::vector<ParseReport>* reports) {
  if (cfg.inputs.empty()) throw ConfigError("no input tape given");
  std::vector<ParsedTape> parts;
  for (const std::string& path : cfg.inputs) {
    const TapeFormat f = cfg.format ? *cfg.format : detect_format(path);
    parts.push_back(load_tape(path, f, cfg.schema));
    if (reports != nullptr) reports->push_back(parts.back().report);
  }
  if (parts.size() == 1) return std::move(parts.front());
  ParsedTape merged;
  TapeMetadata meta = parts.front().tape.metadata();
  std::vector<Trade> trades;
  for (const ParsedTape& p : parts) {
    if (p.tape.metadata().price_exponent != meta.price_exponent ||
        p.tape.metadata().volume_exponent != meta.volume_exponent) {
      throw DataError("input tapes use different decimal exponents");
    }
    trades.insert(trades.end(), p.tape.trades().begin(), p.tape.trades().end());
    merged.report.rows += p.report.rows;
    merged.report.inversions_repaired += p.report.inversions_repaired;
    merged.report.quote_warnings += p.report.quote_warnings;
  }
  std::stable_sort(trades.begin(), trades.end(), [](const Trade& a, const Trade& b) {
    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.trade_id < b.trade_id;
  });
  for (std::size_t i = 1; i < trades.size(); ++i) {
    if (trades[i].trade_id == trades[i - 1].trade_id && trades[i].timestamp == trades[i - 1].timestamp) {
      throw DataError(fmt::format("duplicate trade_id {} across inputs", trades[i].trade_id));
    }
  }
  merged.tape = Tape(std::move(meta), std::move(trades));
  return merged;
}

namespace {

template <typename Fn>
void attempt(json& fits, json& notes, const char* key, Fn&& fn) {
  try {
    fits[key] = fn();
  } catch (const DataError& e) {
    fits[key] = report::unavailable(e.what());
    notes[key] = e.what();
  }
}

json curve_fit(const PeakImpactCurve& curve, const char* what) {
  std::vector<FitPoint> pts;
  for (const CurvePoint& p : curve.points) pts.push_back({p.q_mean, p.mean, static_cast<double>(p.n)});
  const PowerLawFit fit = fit_power_law(pts);
  json j = report::to_json(fit, fmt::format("weighted log-log OLS of mean {} on geometric-mean |Q| per bin, "
                                            "weights = bin counts; bins with non-positive mean skipped",
                                            what));
  j["delta"] = j["exponent"];
  j["y_tilde"] = j["prefactor"];
  return j;
}

}  // namespace

PipelineResult run_pipeline(const Tape& tape, const RunConfig& cfg, unsigned stages) {
  cfg.validate();
  if (cfg.workers > 0) parallel::set_workers(cfg.workers);
  if (stages & (kStageLiquidity | kStageSurface)) stages |= kStageImpact;
  if (stages & kStageEventStudy) stages |= kStageIsolation;
  stages |= kStageSegment;

  PipelineResult r;
  r.stages = stages;
  if (tape.empty()) throw DataError("stage segment: no metaorders");
  const MarketIndex index(tape);
  r.days = daily_aggregates(tape, cfg.vol);

  r.segmentation = segment(tape, index, cfg.segmentation);
  const MetaOrderSet& set = r.segmentation.metaorders;
  if (set.empty()) throw DataError("stage segment: no metaorders");
  r.child_counts = child_count_table(set);
  try {
    r.profile = execution_profile(tape, set, cfg.profile_points);
  } catch (const DataError& e) {
    r.notes["execution_profile"] = e.what();
  }
  r.active = active_metaorder_series(set, cfg.active_resolution_seconds);
  attempt(r.fits, r.notes, "hill", [&] {
    std::vector<double> q(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) q[i] = set.q(set[i]);
    return report::to_json(hill_tail(q, cfg.hill_threshold));
  });

  if (stages & kStageImpact) {
    r.impacts = compute_impacts(tape, index, set, cfg.impact);
    attempt(r.fits, r.notes, "peak_impact", [&] {
      r.peak_curve = peak_impact_curve(*r.impacts, set, cfg.peak_binning, false);
      return curve_fit(*r.peak_curve, "peak impact");
    });
    attempt(r.fits, r.notes, "trajectory_impact", [&] {
      r.trajectory_curve = peak_impact_curve(*r.impacts, set, cfg.peak_binning, true);
      return curve_fit(*r.trajectory_curve, "impact including in-trajectory samples at r|Q|");
    });
    if (r.peak_curve) {
      r.trajectory = compare_trajectory(*r.impacts, set, *r.peak_curve, cfg.trajectory_r_min);
      r.fits["trajectory_identity"] = {{"r_min", cfg.trajectory_r_min},
                                       {"max_relative_deviation", r.trajectory->max_relative_deviation},
                                       {"estimator", "mean path sample at r vs mean peak curve at r|Q|, "
                                                     "log-log interpolated, T > 0 metaorders"}};
    }
  }

  if (stages & kStageLiquidity) {
    r.liquidity = daily_liquidity_series(*r.impacts, set, r.days);
    attempt(r.fits, r.notes, "y_ratio", [&] {
      std::vector<double> y;
      for (const DailyLiquidity& d : r.liquidity) {
        if (d.y_ratio) y.push_back(*d.y_ratio);
      }
      json j = report::to_json(fit_gaussian(y));
      j["Y0"] = j["mean"];
      j["Sigma_Y"] = j["std"];
      return j;
    });
  }

  if (stages & kStageSurface) {
    r.surface = impact_surface(*r.impacts, set, index, cfg.surface_binning);
    attempt(r.fits, r.notes, "surface", [&] {
      std::vector<BivariatePoint> pts;
      for (const SurfaceCell& c : r.surface->cells) {
        if (!c.masked) pts.push_back({c.q_mean, c.muv_mean, c.mean_exec, static_cast<double>(c.n)});
      }
      const BivariatePowerLawFit fit = fit_bivariate_power_law(pts);
      json j = report::to_json(fit);
      j["delta"] = fit.exponent1;
      j["delta_prime"] = -fit.exponent2;
      return j;
    });
    attempt(r.fits, r.notes, "surface_imbalance", [&] {
      std::vector<FitPoint> pts;
      for (const SurfaceCell& c : r.surface->cells) {
        if (!c.masked) pts.push_back({c.mean_imbalance, c.mean_exec, static_cast<double>(c.n)});
      }
      return report::to_json(fit_power_law(pts), "weighted log-log OLS of cell mean_exec on cell mean s*V_signed");
    });
    r.collapse = surface_collapse(*r.surface);
    if (r.collapse) {
      r.fits["surface_collapse"] = {{"pooled", r.collapse->pooled},
                                    {"max_relative_deviation", r.collapse->max_relative_deviation},
                                    {"n_cells", r.collapse->n_cells},
                                    {"estimator", "per-cell mean_exec / sqrt(mean_imbalance) vs count-weighted pool"}};
    } else {
      r.fits["surface_collapse"] = report::unavailable("no unmasked cell with positive imbalance");
    }
  }

  if (stages & kStageIsolation) r.isolation = select_isolated(set, index, cfg.isolation);
  if (stages & kStageEventStudy) r.events = event_study(tape, index, set, cfg.event_study, &*r.isolation);

  if (stages & kStageAcf) {
    attempt(r.fits, r.notes, "sign_acf", [&]() -> json {
      if (set.size() < 3) throw DataError("fewer than 3 metaorders");
      std::vector<int> signs(set.size());
      for (std::size_t i = 0; i < set.size(); ++i) signs[i] = set[i].sign;
      r.acf = sign_acf(signs, std::min(cfg.acf_max_lag, set.size() - 1), cfg.acf_fit_min, cfg.acf_fit_max);
      return report::to_json(*r.acf);
    });
  }
  return r;
}

json write_outputs(const Tape& tape, const PipelineResult& r, const RunConfig& cfg, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(fmt::format("cannot create output directory {}: {}", dir.string(), ec.message()));
  const MetaOrderSet& set = r.segmentation.metaorders;
  const int vexp = tape.metadata().volume_exponent;
  std::vector<std::string> files;
  auto emit = [&](const char* name, const std::string& contents) {
    report::write_file(dir / name, contents);
    files.emplace_back(name);
  };

  emit("daily_aggregates.csv", report::daily_aggregates_csv(r.days, vexp));
  emit("metaorders.csv", report::metaorders_csv(set));
  if (r.child_counts) emit("child_counts.csv", report::child_counts_csv(*r.child_counts));
  if (r.profile) emit("execution_profile.csv", report::execution_profile_csv(*r.profile));
  emit("active_metaorders.csv", report::active_metaorders_csv(r.active, vexp));
  if (r.impacts) emit("impact_summaries.csv", report::impact_summaries_csv(*r.impacts));
  if (r.peak_curve) emit("peak_curve.csv", report::peak_curve_csv(*r.peak_curve));
  if (r.trajectory_curve) emit("trajectory_curve.csv", report::peak_curve_csv(*r.trajectory_curve));
  if (r.trajectory) emit("trajectory_identity.csv", report::trajectory_comparison_csv(*r.trajectory));
  if (r.stages & kStageLiquidity) emit("daily_liquidity.csv", report::daily_liquidity_csv(r.liquidity));
  if (r.surface) emit("impact_surface.csv", report::impact_surface_csv(*r.surface));
  if (r.isolation) emit("isolation.csv", report::isolation_csv(*r.isolation));
  if (r.stages & kStageEventStudy) emit("event_study.csv", report::event_study_csv(r.events));
  if (r.acf) emit("sign_acf.csv", report::sign_acf_csv(*r.acf));

  json manifest;
  manifest["schema"] = "metaimpact.manifest";
  manifest["schema_version"] = kManifestVersion;
  manifest["config"] = cfg.to_json();
  json tape_info{{"trades", tape.size()},
                 {"days", r.days.size()},
                 {"first_timestamp", tape.empty() ? 0 : tape[0].timestamp},
                 {"last_timestamp", tape.empty() ? 0 : tape[tape.size() - 1].timestamp},
                 {"has_quotes", tape.has_quotes()},
                 {"price_exponent", tape.metadata().price_exponent},
                 {"volume_exponent", vexp},
                 {"volatility_estimator", cfg.vol.name()}};
  manifest["tape"] = tape_info;
  json ingest = json::array();
  for (const ParseReport& p : r.ingest) {
    ingest.push_back({{"rows", p.rows}, {"inversions_repaired", p.inversions_repaired}, {"quote_warnings", p.quote_warnings}});
  }
  manifest["ingest"] = ingest;
  json seg{{"metaorders", set.size()},
           {"aggressive_trades", r.segmentation.aggressive_trades},
           {"unassigned_trades", r.segmentation.unassigned_trades}};
  if (r.child_counts) {
    seg["child_count_fractions"] = {{"1", r.child_counts->fractions[0]},
                                    {"2-4", r.child_counts->fractions[1]},
                                    {"5-9", r.child_counts->fractions[2]},
                                    {">=10", r.child_counts->fractions[3]}};
  }
  if (r.profile) {
    seg["execution_profile"] = {{"n_metaorders", r.profile->n_metaorders},
                                {"max_deviation", r.profile->max_deviation}};
  }
  std::size_t peak_active = 0;
  double mean_active = 0.0;
  for (const ActivePoint& p : r.active) {
    peak_active = std::max(peak_active, p.n_buy + p.n_sell);
    mean_active += static_cast<double>(p.n_buy + p.n_sell);
  }
  if (!r.active.empty()) mean_active /= static_cast<double>(r.active.size());
  seg["active_metaorders"] = {{"mean", mean_active}, {"max", peak_active}};
  manifest["segmentation"] = seg;
  if (r.isolation) {
    manifest["isolation"] = {{"isolated", r.isolation->n_isolated},
                             {"informed", r.isolation->n_informed},
                             {"excluded", r.isolation->n_excluded},
                             {"threshold", cfg.isolation.threshold},
                             {"horizon_mult", cfg.isolation.horizon_mult}};
  }
  if (r.stages & kStageEventStudy) {
    json ev = json::array();
    for (const EventStudyCurve& c : r.events) {
      ev.push_back({{"bucket", c.bucket}, {"n", c.n}, {"peak", c.peak}, {"permanent", c.permanent}});
    }
    manifest["event_study"] = ev;
  }
  manifest["fits"] = r.fits;

  auto pick = [&](const char* fit, const char* field) -> json {
    if (!r.fits.contains(fit)) return nullptr;
    const json& f = r.fits.at(fit);
    return f.contains(field) ? f.at(field) : json(nullptr);
  };
  manifest["parameters"] = {{"delta", pick("peak_impact", "delta")},
                            {"y_tilde", pick("peak_impact", "y_tilde")},
                            {"Y0", pick("y_ratio", "Y0")},
                            {"Sigma_Y", pick("y_ratio", "Sigma_Y")},
                            {"delta_prime", pick("surface", "delta_prime")},
                            {"gamma", pick("sign_acf", "gamma")},
                            {"hill_alpha", pick("hill", "hill_alpha")}};
  manifest["notes"] = r.notes;
  files.emplace_back("manifest.json");
  manifest["files"] = files;
  report::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace metaimpact
