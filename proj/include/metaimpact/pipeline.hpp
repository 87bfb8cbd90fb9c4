#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "metaimpact/estimators.hpp"
#include "metaimpact/event_study.hpp"
#include "metaimpact/impact.hpp"
#include "metaimpact/segmenter.hpp"
#include "metaimpact/tape.hpp"
#include "metaimpact/tape_io.hpp"

namespace metaimpact {

struct RunConfig {
  std::vector<std::string> inputs;
  std::optional<TapeFormat> format;  // detected per file when unset
  CsvSchema schema;
  SegmentationConfig segmentation;
  ImpactConfig impact;
  LogBinning peak_binning;
  SurfaceBinning surface_binning;
  IsolationConfig isolation;
  EventStudyConfig event_study;
  VolEstimator vol;
  std::size_t acf_max_lag = 1000;
  std::size_t acf_fit_min = 1;
  std::size_t acf_fit_max = 100;
  double hill_threshold = 10.0;
  double active_resolution_seconds = 60.0;
  std::size_t profile_points = 41;
  double trajectory_r_min = 0.1;
  std::string output_dir = ".";
  int workers = 0;  // 0 = runtime default

  void validate() const;
  // Every setting that can change results (no paths to outputs, no worker count).
  nlohmann::json to_json() const;
};

// Stages, in dependency order; requesting a stage runs its prerequisites.
enum Stage : unsigned {
  kStageSegment = 1u << 0,
  kStageImpact = 1u << 1,
  kStageLiquidity = 1u << 2,
  kStageSurface = 1u << 3,
  kStageIsolation = 1u << 4,
  kStageEventStudy = 1u << 5,
  kStageAcf = 1u << 6,
  kStageAll = 0x7Fu,
};

struct PipelineResult {
  std::vector<ParseReport> ingest;
  std::vector<DailyAggregate> days;
  Segmentation segmentation;
  std::optional<ChildCountTable> child_counts;
  std::optional<ExecutionProfile> profile;
  std::vector<ActivePoint> active;
  std::optional<ImpactTable> impacts;
  std::optional<PeakImpactCurve> peak_curve;
  std::optional<PeakImpactCurve> trajectory_curve;
  std::optional<TrajectoryComparison> trajectory;
  std::vector<DailyLiquidity> liquidity;
  std::optional<ImpactSurface> surface;
  std::optional<SurfaceCollapse> collapse;
  std::optional<Isolation> isolation;
  std::vector<EventStudyCurve> events;
  std::optional<AcfFit> acf;
  nlohmann::json fits = nlohmann::json::object();
  nlohmann::json notes = nlohmann::json::object();  // stage -> reason a product is missing
  unsigned stages = 0;
};

// Loads and merges every input (trade ids must stay unique across files).
ParsedTape load_inputs(const RunConfig& cfg, std::vector<ParseReport>* reports = nullptr);

// Throws DataError("stage <name>: <cause>") when a stage cannot run at all,
// e.g. "stage segment: no metaorders" for an empty tape. Fits that lack data
// are recorded as unavailable with a reason instead.
PipelineResult run_pipeline(const Tape& tape, const RunConfig& cfg, unsigned stages = kStageAll);

inline constexpr int kManifestVersion = 1;

// Writes the CSV bundle for the computed stages plus manifest.json; returns
// the manifest.
nlohmann::json write_outputs(const Tape& tape, const PipelineResult& result, const RunConfig& cfg,
                             const std::filesystem::path& dir);

}  // namespace metaimpact
