// metaimpact: command-line driver for ingest, segmentation, impact
// measurement, synthetic tapes and oracle checks.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <unordered_map>

#include "metaimpact/decimal.hpp"
#include "metaimpact/error.hpp"
#include "metaimpact/estimators.hpp"
#include "metaimpact/oracle.hpp"
#include "metaimpact/parallel.hpp"
#include "metaimpact/pipeline.hpp"
#include "metaimpact/report.hpp"
#include "metaimpact/synthgen.hpp"
#include "metaimpact/tape_io.hpp"

namespace fs = std::filesystem;
using namespace metaimpact;
using nlohmann::json;

namespace {

struct Options {
  RunConfig run;
  std::string format = "auto";
  std::string output;      // ingest: binary tape path
  std::string scenario;    // synth/oracle
  std::string truth;       // oracle: ground_truth.csv
  std::string synth_format = "csv";
  std::int64_t seed = -1;
};

std::string default_out_dir() {
  const char* env = std::getenv("METAIMPACT_OUT_DIR");
  return env != nullptr && *env != '\0' ? env : ".";
}

void add_input_options(CLI::App* cmd, Options& o) {
  cmd->add_option("-i,--input", o.run.inputs, "Input tape(s), CSV or binary")->required();
  cmd->add_option("--format", o.format, "Input format")->check(CLI::IsMember({"auto", "csv", "binary"}));
  cmd->add_option("--price-exponent", o.run.schema.price_exponent, "CSV price decimal exponent");
  cmd->add_option("--volume-exponent", o.run.schema.volume_exponent, "CSV volume decimal exponent");
  cmd->add_option("--tick", o.run.schema.tick, "Price tick in scaled units (quote validation)");
}

void add_common_options(CLI::App* cmd, Options& o) {
  cmd->add_option("-o,--out-dir", o.run.output_dir, "Output directory (default $METAIMPACT_OUT_DIR or .)");
  cmd->add_option("-w,--workers", o.run.workers, "Worker threads (0 = runtime default)");
}

void add_analysis_options(CLI::App* cmd, Options& o) {
  RunConfig& r = o.run;
  cmd->add_option("--t-inact", r.segmentation.t_inact_seconds, "Inactivity threshold, seconds");
  cmd->add_flag("!--keep-mean-reverting", r.segmentation.drop_mean_reverting,
                "Emit reversal metaorders that only unwind the previous one");
  cmd->add_flag("!--reversal-unassigned", r.segmentation.reversal_starts_new,
                "Leave reversing trades unassigned until the next inactivity gap");
  cmd->add_option("--n-points", r.impact.n_points, "Path samples per metaorder");
  cmd->add_option("--perm-lo", r.impact.perm_lo_mult, "Permanent window start, multiples of T after t_end");
  cmd->add_option("--perm-hi", r.impact.perm_hi_mult, "Permanent window end, multiples of T after t_end");
  cmd->add_option("--q-bins", r.peak_binning.per_decade, "|Q| bins per decade (peak curve)");
  cmd->add_option("--n-min", r.peak_binning.n_min, "Minimum metaorders per reported bin");
  cmd->add_option("--min-children", r.peak_binning.min_children, "Minimum children for the peak curve");
  cmd->add_option("--surface-q-bins", r.surface_binning.q_per_decade, "|Q| bins per decade (surface)");
  cmd->add_option("--surface-muv-bins", r.surface_binning.muv_per_decade, "mu_V bins per decade (surface)");
  cmd->add_option("--surface-n-min", r.surface_binning.n_min, "Minimum metaorders per surface cell");
  cmd->add_option("--iso-threshold", r.isolation.threshold, "Isolation share of window imbalance");
  cmd->add_option("--iso-horizon", r.isolation.horizon_mult, "Isolation window, multiples of T");
  cmd->add_option("--es-pre", r.event_study.pre_mult, "Event-study pre window, multiples of T");
  cmd->add_option("--es-post", r.event_study.post_mult, "Event-study post window, multiples of T");
  cmd->add_option("--es-points", r.event_study.n_points, "Event-study grid points across the execution");
  cmd->add_option("--es-n-min", r.event_study.n_min, "Minimum metaorders per event-study bucket");
  cmd->add_flag("--es-by-q", r.event_study.by_q, "Add |Q| buckets to the event study");
  cmd->add_flag("--es-by-mu", r.event_study.by_mu, "Add mu buckets to the event study");
  cmd->add_option("--acf-max-lag", r.acf_max_lag, "Largest sign-ACF lag");
  cmd->add_option("--acf-fit-min", r.acf_fit_min, "First lag of the ACF power-law fit");
  cmd->add_option("--acf-fit-max", r.acf_fit_max, "Last lag of the ACF power-law fit");
  cmd->add_option("--hill-threshold", r.hill_threshold, "Hill threshold on |Q|");
  cmd->add_option("--active-resolution", r.active_resolution_seconds, "Active-metaorder grid step, seconds");
  cmd->add_option("--vol-bin", r.vol.bin_seconds, "Realized-volatility bin, seconds");
}

void finalize(Options& o) {
  if (o.format == "csv") o.run.format = TapeFormat::Csv;
  if (o.format == "binary") o.run.format = TapeFormat::Binary;
  if (o.run.workers > 0) parallel::set_workers(o.run.workers);
}

int run_analysis(Options& o, unsigned stages) {
  finalize(o);
  o.run.validate();
  std::vector<ParseReport> reports;
  ParsedTape parsed = load_inputs(o.run, &reports);
  PipelineResult result = run_pipeline(parsed.tape, o.run, stages);
  result.ingest = reports;
  const json manifest = write_outputs(parsed.tape, result, o.run, o.run.output_dir);
  std::cout << fmt::format("{} trades, {} metaorders -> {}\n", parsed.tape.size(),
                           result.segmentation.metaorders.size(), o.run.output_dir);
  for (const auto& [key, value] : manifest.at("parameters").items()) {
    std::cout << fmt::format("  {} = {}\n", key, value.is_null() ? "n/a" : value.dump());
  }
  return 0;
}

int run_ingest(Options& o) {
  finalize(o);
  fs::create_directories(o.run.output_dir);
  std::vector<ParseReport> reports;
  ParsedTape parsed = load_inputs(o.run, &reports);
  const fs::path out = o.output.empty() ? fs::path(o.run.output_dir) / "tape.bin" : fs::path(o.output);
  save_tape(out, parsed.tape, TapeFormat::Binary);
  json rep;
  rep["rows"] = parsed.report.rows;
  rep["inversions_repaired"] = parsed.report.inversions_repaired;
  rep["quote_warnings"] = parsed.report.quote_warnings;
  rep["errors"] = 0;
  rep["binary"] = out.string();
  json days = json::array();
  if (!parsed.tape.empty()) {
    const auto agg = daily_aggregates(parsed.tape, o.run.vol);
    for (const DailyAggregate& d : agg) {
      json day;
      day["date"] = format_day(d.day);
      day["V_D"] = format_scaled(d.volume, parsed.tape.metadata().volume_exponent);
      day["sigma_D"] = d.sigma;
      day["n_trades"] = d.n_trades;
      days.push_back(std::move(day));
    }
    report::write_file(fs::path(o.run.output_dir) / "daily_aggregates.csv",
                       report::daily_aggregates_csv(agg, parsed.tape.metadata().volume_exponent));
  }
  rep["daily_aggregates"] = days;
  rep["volatility_estimator"] = o.run.vol.name();
  report::write_file(fs::path(o.run.output_dir) / "ingest_report.json", rep.dump(2) + "\n");
  std::cout << fmt::format("{} rows, {} inversions repaired, {} quote warnings -> {}\n", parsed.report.rows,
                           parsed.report.inversions_repaired, parsed.report.quote_warnings, out.string());
  return 0;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError(fmt::format("cannot read {}", path));
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

SyntheticScenario load_scenario(const Options& o) {
  SyntheticScenario sc = o.scenario.empty() ? SyntheticScenario{} : scenario_from_json(read_file(o.scenario));
  if (o.seed >= 0) sc.seed = static_cast<std::uint64_t>(o.seed);
  sc.validate();
  return sc;
}

int run_synth(Options& o) {
  finalize(o);
  const SyntheticScenario sc = load_scenario(o);
  const SyntheticOutput out = generate(sc);
  const fs::path dir = o.run.output_dir;
  fs::create_directories(dir);
  if (o.synth_format == "csv" || o.synth_format == "both") save_tape(dir / "tape.csv", out.tape, TapeFormat::Csv);
  if (o.synth_format == "binary" || o.synth_format == "both") save_tape(dir / "tape.bin", out.tape, TapeFormat::Binary);
  write_ground_truth_csv(out.tape, out.truth, (dir / "ground_truth.csv").string());
  write_planted_metaorders_csv(out.truth, sc.volume_exponent, (dir / "planted_metaorders.csv").string());
  write_planted_days_csv(out.truth, (dir / "planted_days.csv").string());
  report::write_file(dir / "scenario.json", scenario_to_json(sc) + "\n");
  std::cout << fmt::format("{} trades, {} planted metaorders -> {}\n", out.tape.size(), out.truth.metaorders.size(),
                           dir.string());
  return 0;
}

std::vector<std::uint64_t> read_labels(const Tape& tape, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(fmt::format("cannot read {}", path));
  std::unordered_map<std::uint64_t, std::uint64_t> by_id;
  std::string line;
  std::size_t n = 0;
  while (std::getline(f, line)) {
    ++n;
    if (n == 1 || line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("expected trade_id,metaorder_id", n);
    try {
      const std::uint64_t id = std::stoull(line.substr(0, comma));
      const std::string label = line.substr(comma + 1);
      by_id[id] = label.empty() ? kUnassigned : std::stoull(label);
    } catch (const std::logic_error&) {
      throw ParseError("malformed ground-truth row", n);
    }
  }
  std::vector<std::uint64_t> labels(tape.size(), kUnassigned);
  for (std::size_t i = 0; i < tape.size(); ++i) {
    const auto it = by_id.find(tape[i].trade_id);
    if (it != by_id.end()) labels[i] = it->second;
  }
  return labels;
}

int run_oracle(Options& o) {
  finalize(o);
  Tape tape;
  std::vector<std::uint64_t> labels;
  if (!o.scenario.empty()) {
    SyntheticOutput out = generate(load_scenario(o));
    tape = std::move(out.tape);
    labels = std::move(out.truth.trade_metaorder);
  } else {
    if (o.run.inputs.empty() || o.truth.empty()) throw ConfigError("oracle needs --scenario, or --input with --truth");
    tape = load_inputs(o.run).tape;
    labels = read_labels(tape, o.truth);
  }
  OracleConfig oc;
  oc.active_resolution_seconds = o.run.active_resolution_seconds;
  oc.n_points = o.run.impact.n_points;
  oc.perm_lo_mult = o.run.impact.perm_lo_mult;
  oc.perm_hi_mult = o.run.impact.perm_hi_mult;
  oc.horizon_mult = o.run.isolation.horizon_mult;
  const OracleStats oracle = brute_force_stats(tape, labels, oc);

  const MarketIndex index(tape);
  const Segmentation seg = segment(tape, index, o.run.segmentation);
  const MetaOrderSet& set = seg.metaorders;
  json checks = json::object();
  bool all_ok = true;
  auto check = [&](const char* name, bool ok, json detail) {
    detail["pass"] = ok;
    checks[name] = detail;
    all_ok = all_ok && ok;
  };

  bool labels_equal = set.size() == oracle.metaorders.size();
  for (std::size_t m = 0; labels_equal && m < set.size(); ++m) {
    const auto kids = set.children(set[m]);
    labels_equal = kids.size() == oracle.metaorders[m].children.size() &&
                   std::equal(kids.begin(), kids.end(), oracle.metaorders[m].children.begin());
  }
  check("segmentation", labels_equal, {{"recovered", set.size()}, {"labelled", oracle.metaorders.size()}});

  std::size_t imbalance_mismatch = 0;
  for (std::size_t m = 0; m < oracle.metaorders.size(); ++m) {
    const OracleMetaOrder& om = oracle.metaorders[m];
    if (market_imbalance(index, {om.t_start, om.t_end}) != oracle.execution_imbalance[m]) ++imbalance_mismatch;
  }
  check("window_imbalance", imbalance_mismatch == 0, {{"mismatches", imbalance_mismatch}});

  if (labels_equal) {
    const auto active = active_metaorder_series(set, oc.active_resolution_seconds);
    bool same = active.size() == oracle.active.size();
    for (std::size_t k = 0; same && k < active.size(); ++k) {
      same = active[k].time == oracle.active[k].time && active[k].n_buy == oracle.active[k].n_buy &&
             active[k].n_sell == oracle.active[k].n_sell && active[k].volume_buy == oracle.active[k].volume_buy &&
             active[k].volume_sell == oracle.active[k].volume_sell;
    }
    check("active_series", same, {{"points", active.size()}});

    const ImpactTable table = compute_impacts(tape, index, set, o.run.impact);
    double max_diff = 0.0;
    bool perm_same = true;
    for (std::size_t m = 0; m < set.size(); ++m) {
      const ImpactSummary& a = table.summaries[m];
      const ImpactSummary& b = oracle.summaries[m];
      max_diff = std::max({max_diff, std::fabs(a.peak - b.peak), std::fabs(a.exec - b.exec)});
      perm_same = perm_same && a.perm.has_value() == b.perm.has_value();
      if (a.perm && b.perm) max_diff = std::max(max_diff, std::fabs(*a.perm - *b.perm));
    }
    check("impact_summaries", perm_same && max_diff <= 1e-9, {{"max_abs_diff", max_diff}});

    if (!oracle.sign_acf.empty()) {
      std::vector<int> signs(set.size());
      for (std::size_t m = 0; m < set.size(); ++m) signs[m] = set[m].sign;
      const AcfFit acf = sign_acf(signs, oracle.sign_acf.size() - 1);
      double acf_diff = 0.0;
      for (std::size_t l = 0; l < oracle.sign_acf.size(); ++l) {
        acf_diff = std::max(acf_diff, std::fabs(acf.correlation[l] - oracle.sign_acf[l]));
      }
      check("sign_acf", acf_diff <= 1e-12, {{"max_abs_diff", acf_diff}});
    }
  }

  fs::create_directories(o.run.output_dir);
  json rep{{"trades", tape.size()}, {"checks", checks}, {"pass", all_ok}};
  report::write_file(fs::path(o.run.output_dir) / "oracle_report.json", rep.dump(2) + "\n");
  for (const auto& [name, c] : checks.items()) {
    std::cout << fmt::format("{} {}\n", c.at("pass").get<bool>() ? "PASS" : "FAIL", name);
  }
  return all_ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metaorder reconstruction and market-impact measurement"};
  app.require_subcommand(1);
  Options o;
  o.run.output_dir = default_out_dir();
  int code = 0;

  auto* ingest = app.add_subcommand("ingest", "Validate a tape and write its binary twin plus a report");
  add_input_options(ingest, o);
  add_common_options(ingest, o);
  ingest->add_option("--output", o.output, "Binary tape path (default <out-dir>/tape.bin)");
  ingest->callback([&] { code = run_ingest(o); });

  struct Analysis {
    const char* name;
    const char* help;
    unsigned stages;
  };
  const Analysis analyses[] = {
      {"segment", "Reconstruct metaorders; child counts, execution profile, active series", kStageSegment},
      {"impact", "Per-metaorder impact summaries, peak and trajectory curves", kStageImpact},
      {"yratio", "Daily Y~ and Y-ratio series with a Gaussian fit", kStageLiquidity},
      {"surface", "Impact surface over |Q| and mu_V", kStageSurface},
      {"eventstudy", "Event-study curves by bucket", kStageEventStudy},
      {"isolate", "Isolated/informed labels", kStageIsolation},
      {"acf", "Metaorder sign autocorrelation", kStageAcf},
      {"pipeline", "Every stage plus the manifest", kStageAll},
  };
  for (const Analysis& a : analyses) {
    auto* cmd = app.add_subcommand(a.name, a.help);
    add_input_options(cmd, o);
    add_common_options(cmd, o);
    add_analysis_options(cmd, o);
    const unsigned stages = a.stages;
    cmd->callback([&o, &code, stages] { code = run_analysis(o, stages); });
  }

  auto* synth = app.add_subcommand("synth", "Generate a synthetic tape with ground truth");
  synth->add_option("-s,--scenario", o.scenario, "Scenario JSON (defaults when omitted)");
  synth->add_option("--seed", o.seed, "Override the scenario seed");
  synth->add_option("--tape-format", o.synth_format, "Tape encoding")->check(CLI::IsMember({"csv", "binary", "both"}));
  add_common_options(synth, o);
  synth->callback([&] { code = run_synth(o); });

  auto* oracle = app.add_subcommand("oracle", "Compare fast kernels with naive recomputation from labels");
  oracle->add_option("-s,--scenario", o.scenario, "Scenario JSON to generate and check");
  oracle->add_option("--seed", o.seed, "Override the scenario seed");
  oracle->add_option("-i,--input", o.run.inputs, "Tape to check (with --truth)");
  oracle->add_option("--truth", o.truth, "ground_truth.csv for --input");
  oracle->add_option("--format", o.format, "Input format")->check(CLI::IsMember({"auto", "csv", "binary"}));
  add_common_options(oracle, o);
  oracle->add_option("--active-resolution", o.run.active_resolution_seconds, "Active-metaorder grid step, seconds");
  oracle->add_option("--t-inact", o.run.segmentation.t_inact_seconds, "Inactivity threshold, seconds");
  oracle->callback([&] { code = run_oracle(o); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return code;
}
