#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "metaimpact/estimators.hpp"
#include "metaimpact/event_study.hpp"
#include "metaimpact/impact.hpp"
#include "metaimpact/segmenter.hpp"
#include "metaimpact/tape.hpp"

namespace metaimpact::report {

// Shortest round-trip decimal; empty for NaN/inf or unset values.
std::string num(double v);
std::string num(const std::optional<double>& v);

void write_file(const std::filesystem::path& path, std::string_view contents);

std::string metaorders_csv(const MetaOrderSet& set);
std::string child_counts_csv(const ChildCountTable& table);
std::string execution_profile_csv(const ExecutionProfile& profile);
std::string active_metaorders_csv(std::span<const ActivePoint> series, int volume_exponent);
std::string daily_aggregates_csv(std::span<const DailyAggregate> days, int volume_exponent);
std::string impact_summaries_csv(const ImpactTable& table);
std::string peak_curve_csv(const PeakImpactCurve& curve);
std::string trajectory_comparison_csv(const TrajectoryComparison& cmp);
std::string daily_liquidity_csv(std::span<const DailyLiquidity> rows);
std::string impact_surface_csv(const ImpactSurface& surface);
std::string isolation_csv(const Isolation& isolation);
std::string event_study_csv(std::span<const EventStudyCurve> curves);
std::string sign_acf_csv(const AcfFit& acf);

nlohmann::json to_json(const PowerLawFit& fit, std::string_view estimator);
nlohmann::json to_json(const BivariatePowerLawFit& fit);
nlohmann::json to_json(const TailFit& fit);
nlohmann::json to_json(const AcfFit& fit);
nlohmann::json to_json(const GaussianFit& fit);
// {"value": null, "reason": ...} for fits that could not be made.
nlohmann::json unavailable(std::string_view reason);

}  // namespace metaimpact::report
