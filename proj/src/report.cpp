#include "metaimpact/report.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>

#include "metaimpact/decimal.hpp"
#include "metaimpact/error.hpp"

namespace metaimpact::report {

namespace {

using Buffer = fmt::memory_buffer;

template <typename... Args>
void line(Buffer& buf, fmt::format_string<Args...> f, Args&&... args) {
  fmt::format_to(std::back_inserter(buf), f, std::forward<Args>(args)...);
  buf.push_back('\n');
}

std::string str(const Buffer& buf) { return std::string(buf.data(), buf.size()); }

}  // namespace

std::string num(double v) {
  if (!std::isfinite(v)) return {};
  return fmt::format("{}", v == 0.0 ? 0.0 : v);  // no "-0"
}
std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(fmt::format("cannot write {}", path.string()));
  f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!f) throw Error(fmt::format("write failed for {}", path.string()));
}

std::string metaorders_csv(const MetaOrderSet& set) {
  Buffer b;
  line(b, "id,trader_id,sign,Q,t_start,t_end,T,mu,mu_V,n_children");
  for (const MetaOrder& m : set.orders()) {
    line(b, "{},{},{},{},{},{},{},{},{},{}", m.id, m.trader_id, m.sign, format_scaled(m.volume, set.volume_exponent()),
         m.t_start, m.t_end, num(m.duration), num(m.mu), num(m.mu_v), m.n_children);
  }
  return str(b);
}

std::string child_counts_csv(const ChildCountTable& table) {
  static constexpr const char* names[4] = {"1", "2-4", "5-9", ">=10"};
  Buffer b;
  line(b, "bucket,count,fraction");
  for (std::size_t i = 0; i < 4; ++i) line(b, "{},{},{}", names[i], table.counts[i], num(table.fractions[i]));
  return str(b);
}

std::string execution_profile_csv(const ExecutionProfile& profile) {
  Buffer b;
  line(b, "t_fraction,volume_fraction,n");
  for (std::size_t i = 0; i < profile.grid.size(); ++i) {
    line(b, "{},{},{}", num(profile.grid[i]), num(profile.mean[i]), profile.n_metaorders);
  }
  return str(b);
}

std::string active_metaorders_csv(std::span<const ActivePoint> series, int volume_exponent) {
  Buffer b;
  line(b, "time,n_buy,n_sell,volume_buy,volume_sell");
  for (const ActivePoint& p : series) {
    line(b, "{},{},{},{},{}", p.time, p.n_buy, p.n_sell, format_scaled(p.volume_buy, volume_exponent),
         format_scaled(p.volume_sell, volume_exponent));
  }
  return str(b);
}

std::string daily_aggregates_csv(std::span<const DailyAggregate> days, int volume_exponent) {
  Buffer b;
  line(b, "date,V_D,sigma_D,n_trades");
  for (const DailyAggregate& d : days) {
    line(b, "{},{},{},{}", format_day(d.day), format_scaled(d.volume, volume_exponent), num(d.sigma), d.n_trades);
  }
  return str(b);
}

std::string impact_summaries_csv(const ImpactTable& table) {
  Buffer b;
  line(b, "metaorder_id,Q,peak,exec,perm,perm_mech");
  for (std::size_t i = 0; i < table.summaries.size(); ++i) {
    const ImpactSummary& s = table.summaries[i];
    line(b, "{},{},{},{},{},{}", s.metaorder_id, num(table.q[i]), num(s.peak), num(s.exec), num(s.perm),
         num(s.perm_mech));
  }
  return str(b);
}

std::string peak_curve_csv(const PeakImpactCurve& curve) {
  Buffer b;
  line(b, "bin,q_lo,q_hi,q_center,q_mean,mean,stderr,n");
  for (const CurvePoint& p : curve.points) {
    line(b, "{},{},{},{},{},{},{},{}", p.bin, num(p.q_lo), num(p.q_hi), num(p.q_center), num(p.q_mean), num(p.mean),
         num(p.stderr_), p.n);
  }
  return str(b);
}

std::string trajectory_comparison_csv(const TrajectoryComparison& cmp) {
  Buffer b;
  line(b, "r,path_mean,curve_mean,n");
  for (std::size_t j = 0; j < cmp.r.size(); ++j) {
    line(b, "{},{},{},{}", num(cmp.r[j]), cmp.n[j] ? num(cmp.path_mean[j]) : "", cmp.n[j] ? num(cmp.curve_mean[j]) : "",
         cmp.n[j]);
  }
  return str(b);
}

std::string daily_liquidity_csv(std::span<const DailyLiquidity> rows) {
  Buffer b;
  line(b, "date,y_tilde,sigma_D,V_D,y_ratio,n_metaorders");
  for (const DailyLiquidity& d : rows) {
    line(b, "{},{},{},{},{},{}", format_day(d.day), num(d.y_tilde), num(d.sigma), num(d.v_d), num(d.y_ratio),
         d.n_metaorders);
  }
  return str(b);
}

std::string impact_surface_csv(const ImpactSurface& surface) {
  Buffer b;
  line(b, "q_bin,muv_bin,q_mean,muv_mean,mean_exec,mean_imbalance,n,masked");
  for (const SurfaceCell& c : surface.cells) {
    if (c.masked) {
      line(b, "{},{},,,,,{},1", c.q_bin, c.muv_bin, c.n);
    } else {
      line(b, "{},{},{},{},{},{},{},0", c.q_bin, c.muv_bin, num(c.q_mean), num(c.muv_mean), num(c.mean_exec),
           num(c.mean_imbalance), c.n);
    }
  }
  return str(b);
}

std::string isolation_csv(const Isolation& isolation) {
  Buffer b;
  line(b, "metaorder_id,label,ratio");
  for (std::size_t i = 0; i < isolation.labels.size(); ++i) {
    line(b, "{},{},{}", i, to_string(isolation.labels[i]), num(isolation.ratio[i]));
  }
  return str(b);
}

std::string event_study_csv(std::span<const EventStudyCurve> curves) {
  Buffer b;
  line(b, "bucket,grid_t,curve_name,value,n");
  for (const EventStudyCurve& c : curves) {
    for (const auto& [name, values] : c.curves) {
      for (std::size_t g = 0; g < c.grid.size(); ++g) {
        line(b, "{},{},{},{},{}", c.bucket, num(c.grid[g]), name, num(values[g]), c.n);
      }
    }
  }
  return str(b);
}

std::string sign_acf_csv(const AcfFit& acf) {
  Buffer b;
  line(b, "lag,correlation");
  for (std::size_t l = 0; l < acf.correlation.size(); ++l) line(b, "{},{}", l, num(acf.correlation[l]));
  return str(b);
}

namespace {

nlohmann::json opt(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const PowerLawFit& fit, std::string_view estimator) {
  return {{"exponent", opt(fit.exponent)},
          {"prefactor", opt(fit.prefactor)},
          {"exponent_stderr", opt(fit.exponent_stderr)},
          {"prefactor_stderr", opt(fit.prefactor_stderr)},
          {"r_squared", opt(fit.r_squared)},
          {"x_min", opt(fit.x_min)},
          {"x_max", opt(fit.x_max)},
          {"n_points", fit.n_points},
          {"estimator", estimator}};
}

nlohmann::json to_json(const BivariatePowerLawFit& fit) {
  return {{"prefactor", opt(fit.prefactor)},
          {"exponent_q", opt(fit.exponent1)},
          {"exponent_muv", opt(fit.exponent2)},
          {"exponent_q_stderr", opt(fit.exponent1_stderr)},
          {"exponent_muv_stderr", opt(fit.exponent2_stderr)},
          {"r_squared", opt(fit.r_squared)},
          {"n_points", fit.n_points},
          {"estimator", "weighted OLS of log mean_exec on log Q and log mu_V over unmasked cells, weights = counts"}};
}

nlohmann::json to_json(const TailFit& fit) {
  return {{"hill_alpha", opt(fit.hill_alpha)},
          {"k", fit.k},
          {"n", fit.n},
          {"threshold", fit.threshold},
          {"estimator", "Hill, alpha = k / sum log(x/threshold), complementary-CDF index"}};
}

nlohmann::json to_json(const AcfFit& fit) {
  nlohmann::json j{{"n", fit.n},
                   {"max_lag", fit.correlation.empty() ? 0 : fit.correlation.size() - 1},
                   {"fit_lag_min", fit.fit_lag_min},
                   {"fit_lag_max", fit.fit_lag_max},
                   {"estimator", "sample ACF normalized by 1/(n-l) over the 1/n variance; log-log OLS of positive "
                                 "C(l) on l, gamma = -slope"}};
  j["gamma"] = fit.gamma ? opt(*fit.gamma) : nlohmann::json(nullptr);
  j["gamma_stderr"] = fit.gamma_stderr ? opt(*fit.gamma_stderr) : nlohmann::json(nullptr);
  j["prefactor"] = fit.prefactor ? opt(*fit.prefactor) : nlohmann::json(nullptr);
  if (!fit.fit_note.empty()) j["reason"] = fit.fit_note;
  return j;
}

nlohmann::json to_json(const GaussianFit& fit) {
  return {{"mean", opt(fit.mean)},
          {"std", opt(fit.std)},
          {"ks", opt(fit.ks)},
          {"n", fit.n},
          {"estimator", "sample mean, unbiased (n-1) standard deviation, Kolmogorov-Smirnov distance to the fit"}};
}

nlohmann::json unavailable(std::string_view reason) { return {{"value", nullptr}, {"reason", reason}}; }

}  // namespace metaimpact::report
