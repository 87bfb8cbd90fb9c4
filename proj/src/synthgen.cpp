#include "metaimpact/synthgen.hpp"

#include <fftw3.h>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <json.hpp>
#include <map>

#include "metaimpact/decimal.hpp"
#include "metaimpact/error.hpp"

namespace metaimpact {

using json = nlohmann::json;

#define METAIMPACT_SCENARIO_FIELDS(X)                                                                          \
  X(seed) X(start_day) X(n_days) X(n_traders) X(metaorders_per_trader_per_day) X(t_inact_seconds)             \
  X(min_gap_seconds) X(q_median) X(q_sigma) X(q_min) X(q_max) X(mu_median) X(mu_sigma) X(child_count_mode)    \
  X(min_children) X(max_children) X(child_table) X(schedule) X(time_jitter) X(size_jitter) X(y0) X(sigma_y)   \
  X(delta) X(pi_inf) X(decay_multiple) X(min_decay_seconds) X(response) X(sigma_daily) X(sigma_dispersion)   \
  X(noise_mode) X(noise_sigma) X(noise_floor) X(sign_mode) X(gamma) X(base_daily_volume)                      \
  X(background_size_median) X(background_size_sigma) X(background_size_max) X(background_impact)               \
  X(initial_price) X(spread) X(price_exponent) X(volume_exponent) X(tick)

namespace {

void require(bool ok, const char* field, std::string_view what) {
  if (!ok) throw ConfigError(fmt::format("scenario field '{}': {}", field, what));
}

}  // namespace

void SyntheticScenario::validate() const {
  require(n_days > 0, "n_days", "must be positive");
  require(metaorders_per_trader_per_day > 0.0, "metaorders_per_trader_per_day", "must be positive");
  require(t_inact_seconds > 0.0, "t_inact_seconds", "must be positive");
  require(min_gap_seconds >= t_inact_seconds, "min_gap_seconds",
          "must be at least t_inact_seconds, otherwise same-trader metaorders would merge");
  require(q_median > 0.0 && q_sigma >= 0.0, "q_median", "lognormal parameters must be positive");
  require(q_min > 0.0 && q_max > q_min, "q_min", "need 0 < q_min < q_max");
  require(mu_median > 0.0 && mu_sigma >= 0.0, "mu_median", "lognormal parameters must be positive");
  require(child_count_mode == "uniform" || child_count_mode == "table", "child_count_mode", "expected uniform or table");
  require(min_children >= 1 && max_children >= min_children, "min_children", "need 1 <= min_children <= max_children");
  if (child_count_mode == "table") {
    require(max_children >= 10, "max_children", "table mode needs max_children >= 10");
    double sum = 0.0;
    for (double p : child_table) {
      require(p >= 0.0, "child_table", "probabilities must be non-negative");
      sum += p;
    }
    require(sum > 0.0, "child_table", "probabilities must not all be zero");
  }
  require(schedule == "linear" || schedule == "front_loaded", "schedule", "expected linear or front_loaded");
  require(time_jitter >= 0.0 && time_jitter < 1.0, "time_jitter", "must be in [0, 1)");
  require(size_jitter >= 0.0 && size_jitter < 1.0, "size_jitter", "must be in [0, 1)");
  require(std::isfinite(y0), "y0", "must be finite");
  require(sigma_y >= 0.0, "sigma_y", "must be non-negative");
  require(delta > 0.0 && delta <= 1.0, "delta", "must be in (0, 1]");
  require(pi_inf >= 0.0 && pi_inf <= 1.0, "pi_inf", "must be in [0, 1]");
  require(decay_multiple > 0.0, "decay_multiple", "must be positive");
  require(min_decay_seconds > 0.0, "min_decay_seconds", "must be positive");
  require(response == "own_flow" || response == "aggregate", "response", "expected own_flow or aggregate");
  require(sigma_daily > 0.0, "sigma_daily", "must be positive");
  require(sigma_dispersion >= 0.0, "sigma_dispersion", "must be non-negative");
  require(noise_mode == "calibrated" || noise_mode == "fixed", "noise_mode", "expected calibrated or fixed");
  require(noise_sigma >= 0.0, "noise_sigma", "must be non-negative");
  require(noise_floor >= 0.0 && noise_floor <= 1.0, "noise_floor", "must be in [0, 1]");
  require(sign_mode == "independent" || sign_mode == "long_memory", "sign_mode", "expected independent or long_memory");
  require(gamma > 0.0 && gamma < 1.0, "gamma", "must be in (0, 1)");
  require(base_daily_volume >= 0.0, "base_daily_volume", "must be non-negative");
  require(background_size_median > 0.0 && background_size_sigma >= 0.0, "background_size_median",
          "lognormal parameters must be positive");
  require(background_size_max >= background_size_median, "background_size_max", "must be at least the median");
  require(initial_price > 0.0, "initial_price", "must be positive");
  require(spread >= 0.0 && spread < 0.5, "spread", "must be in [0, 0.5)");
  require(price_exponent <= 0 && price_exponent >= -18, "price_exponent", "must be in [-18, 0]");
  require(volume_exponent <= 0 && volume_exponent >= -18, "volume_exponent", "must be in [-18, 0]");
  require(tick > 0, "tick", "must be positive");
}

std::string scenario_to_json(const SyntheticScenario& s) {
  json j;
#define X(f) j[#f] = s.f;
  METAIMPACT_SCENARIO_FIELDS(X)
#undef X
  return j.dump(2);
}

SyntheticScenario scenario_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("scenario is not valid JSON: {}", e.what()));
  }
  if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
  SyntheticScenario s;
  for (const auto& [key, value] : j.items()) {
    bool known = false;
#define X(f)                                                                   \
  if (key == #f) {                                                             \
    known = true;                                                              \
    try {                                                                      \
      value.get_to(s.f);                                                       \
    } catch (const json::exception&) {                                         \
      throw ConfigError(fmt::format("scenario field '{}': wrong type", key)); \
    }                                                                          \
  }
    METAIMPACT_SCENARIO_FIELDS(X)
#undef X
    if (!known) throw ConfigError(fmt::format("unknown scenario field '{}'", key));
  }
  s.validate();
  return s;
}

std::mt19937_64 substream(std::uint64_t seed, std::string_view name, std::uint64_t index) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

std::vector<double> fractional_gaussian_noise(std::size_t n, double hurst, std::mt19937_64& rng) {
  if (n == 0) return {};
  if (!(hurst > 0.0 && hurst < 1.0)) throw ConfigError("Hurst exponent must be in (0, 1)");
  auto acov = [hurst](double k) {
    const double h2 = 2.0 * hurst;
    return 0.5 * (std::pow(std::fabs(k + 1.0), h2) - 2.0 * std::pow(std::fabs(k), h2) + std::pow(std::fabs(k - 1.0), h2));
  };
  const std::size_t m = 2 * n;
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * m));
  fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(m), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  // Eigenvalues of the circulant embedding.
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t lag = k <= n ? k : m - k;
    buf[k][0] = acov(static_cast<double>(lag));
    buf[k][1] = 0.0;
  }
  fftw_execute(plan);
  std::vector<double> lambda(m);
  for (std::size_t k = 0; k < m; ++k) lambda[k] = std::max(buf[k][0], 0.0);
  std::normal_distribution<double> normal;
  for (std::size_t k = 0; k < m; ++k) {
    const double scale = std::sqrt(lambda[k] / static_cast<double>(m));
    buf[k][0] = scale * normal(rng);
    buf[k][1] = scale * normal(rng);
  }
  fftw_execute(plan);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = buf[k][0];
  fftw_destroy_plan(plan);
  fftw_free(buf);
  return out;
}

namespace {

struct Plan {
  TraderId trader = kNoTrader;
  std::int64_t t_start = 0;
  std::vector<std::int64_t> offsets;  // ns from t_start
  std::vector<std::int64_t> sizes;    // scaled
  std::int64_t volume = 0;
  int sign = 1;
  bool background = false;
  double duration_ns = 0.0;
  double prefactor = 0.0;
  std::uint64_t id = 0;
  std::size_t first_trade = 0;
  std::size_t last_trade = 0;
};

double lognormal(std::mt19937_64& rng, double median, double sigma) {
  std::normal_distribution<double> n;
  return median * std::exp(sigma * n(rng));
}

std::size_t draw_children(const SyntheticScenario& sc, std::mt19937_64& rng) {
  if (sc.child_count_mode == "uniform") {
    return std::uniform_int_distribution<std::size_t>(sc.min_children, sc.max_children)(rng);
  }
  std::discrete_distribution<int> bucket(sc.child_table.begin(), sc.child_table.end());
  static constexpr std::size_t lo[4] = {1, 2, 5, 10};
  static constexpr std::size_t hi[4] = {1, 4, 9, 0};
  const int b = bucket(rng);
  const std::size_t top = b == 3 ? sc.max_children : hi[b];
  return std::uniform_int_distribution<std::size_t>(lo[b], top)(rng);
}

std::vector<Plan> plan_trader(const SyntheticScenario& sc, TraderId trader, std::int64_t h0, std::int64_t h1) {
  auto rng = substream(sc.seed, "trader", trader);
  std::exponential_distribution<double> idle(sc.metaorders_per_trader_per_day / 86400.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double vunit = pow10(sc.volume_exponent);
  const auto ns = [](double seconds) { return static_cast<std::int64_t>(std::llround(seconds * 1e9)); };
  std::vector<Plan> out;
  std::int64_t t = h0 + ns(idle(rng));
  while (t < h1) {
    Plan p;
    p.trader = trader;
    p.t_start = t;
    const double q = std::clamp(lognormal(rng, sc.q_median, sc.q_sigma), sc.q_min, sc.q_max);
    const std::size_t n = draw_children(sc, rng);
    p.volume = std::max<std::int64_t>(static_cast<std::int64_t>(std::llround(q / vunit)), static_cast<std::int64_t>(n));

    // Child sizes: jittered weights, exact total.
    std::vector<double> w(n);
    double wsum = 0.0;
    for (double& x : w) {
      x = 1.0 + sc.size_jitter * unit(rng);
      wsum += x;
    }
    p.sizes.resize(n);
    std::int64_t assigned = 0;
    bool ok = true;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      p.sizes[k] = static_cast<std::int64_t>(std::floor(static_cast<double>(p.volume) * w[k] / wsum));
      if (p.sizes[k] < 1) ok = false;
      assigned += p.sizes[k];
    }
    p.sizes[n - 1] = p.volume - assigned;
    if (!ok || p.sizes[n - 1] < 1) {
      for (std::size_t k = 0; k < n; ++k) p.sizes[k] = p.volume / static_cast<std::int64_t>(n);
      p.sizes[n - 1] += p.volume % static_cast<std::int64_t>(n);
    }

    // Child times on [0, T].
    std::vector<double> u(n, 0.0);
    double duration = 0.0;
    if (n > 1) {
      const double mu = lognormal(rng, sc.mu_median, sc.mu_sigma);
      duration = std::max(q / mu, 1e-3 * static_cast<double>(n - 1));
      const double step = 1.0 / static_cast<double>(n - 1);
      for (std::size_t k = 0; k < n; ++k) u[k] = static_cast<double>(k) * step;
      if (sc.schedule == "linear") {
        for (std::size_t k = 1; k + 1 < n; ++k) u[k] += 0.5 * sc.time_jitter * step * unit(rng);
      } else {
        for (double& x : u) x = x * x;
      }
      double max_gap = 0.0;
      for (std::size_t k = 1; k < n; ++k) max_gap = std::max(max_gap, u[k] - u[k - 1]);
      // Keep consecutive children well inside the inactivity threshold.
      duration = std::min(duration, 0.9 * sc.t_inact_seconds / max_gap);
    }
    p.offsets.resize(n);
    for (std::size_t k = 0; k < n; ++k) p.offsets[k] = ns(u[k] * duration);
    if (n > 1 && p.offsets.back() <= 0) p.offsets.back() = 1;
    p.duration_ns = static_cast<double>(p.offsets.back());
    const std::int64_t t_end = t + p.offsets.back();
    if (t_end >= h1) break;
    out.push_back(std::move(p));
    t = t_end + ns(sc.min_gap_seconds) + ns(idle(rng));
  }
  return out;
}

struct Event {
  std::int64_t time;
  TraderId trader;
  std::uint32_t plan;
  std::uint32_t child;
};

}  // namespace

SyntheticOutput generate(const SyntheticScenario& sc) {
  sc.validate();
  const std::int64_t h0 = sc.start_day * kNanosPerDay;
  const std::int64_t h1 = h0 + static_cast<std::int64_t>(sc.n_days) * kNanosPerDay;
  const double vunit = pow10(sc.volume_exponent);
  if (sc.n_traders >= 3'000'000'000ULL) throw ConfigError("scenario field 'n_traders': too many traders");

  // Metaorder plans per trader, each from its own stream.
  std::vector<std::vector<Plan>> per_trader(sc.n_traders);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t k = 0; k < sc.n_traders; ++k) per_trader[k] = plan_trader(sc, static_cast<TraderId>(k), h0, h1);
  std::vector<Plan> plans;
  for (auto& v : per_trader) {
    for (auto& p : v) plans.push_back(std::move(p));
  }
  std::vector<std::vector<Plan>>().swap(per_trader);
  const std::size_t n_planted = plans.size();

  // Signs in start-time order.
  {
    std::vector<std::size_t> order(n_planted);
    for (std::size_t i = 0; i < n_planted; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return plans[a].t_start != plans[b].t_start ? plans[a].t_start < plans[b].t_start : plans[a].trader < plans[b].trader;
    });
    auto rng = substream(sc.seed, "signs");
    if (sc.sign_mode == "long_memory") {
      const auto x = fractional_gaussian_noise(n_planted, 1.0 - sc.gamma / 2.0, rng);
      for (std::size_t r = 0; r < n_planted; ++r) plans[order[r]].sign = x[r] >= 0.0 ? 1 : -1;
    } else {
      std::bernoulli_distribution coin(0.5);
      for (std::size_t r = 0; r < n_planted; ++r) plans[order[r]].sign = coin(rng) ? 1 : -1;
    }
  }

  // Background one-trade participants.
  if (sc.base_daily_volume > 0.0) {
    auto rng = substream(sc.seed, "background");
    const double mean_size =
        sc.background_size_median * std::exp(0.5 * sc.background_size_sigma * sc.background_size_sigma);
    const double per_ns = sc.base_daily_volume / mean_size / static_cast<double>(kNanosPerDay);
    std::exponential_distribution<double> gap(per_ns);
    std::bernoulli_distribution coin(0.5);
    TraderId next = static_cast<TraderId>(sc.n_traders);
    for (double t = static_cast<double>(h0) + gap(rng); t < static_cast<double>(h1); t += gap(rng)) {
      if (next >= 3'000'000'000U) throw ConfigError("scenario field 'base_daily_volume': too many background trades");
      Plan p;
      p.trader = next++;
      p.t_start = static_cast<std::int64_t>(t);
      p.offsets = {0};
      double v = lognormal(rng, sc.background_size_median, sc.background_size_sigma);
      while (v > sc.background_size_max) v = lognormal(rng, sc.background_size_median, sc.background_size_sigma);
      p.volume = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(v / vunit)));
      p.sizes = {p.volume};
      p.sign = coin(rng) ? 1 : -1;
      p.background = true;
      plans.push_back(std::move(p));
    }
  }

  // Canonical trade order.
  std::vector<Event> events;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    for (std::size_t k = 0; k < plans[i].offsets.size(); ++k) {
      events.push_back({plans[i].t_start + plans[i].offsets[k], plans[i].trader, static_cast<std::uint32_t>(i),
                        static_cast<std::uint32_t>(k)});
    }
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.trader != b.trader) return a.trader < b.trader;
    return a.child < b.child;
  });
  const std::size_t n_trades = events.size();
  for (std::size_t j = 0; j < n_trades; ++j) {
    Plan& p = plans[events[j].plan];
    if (events[j].child == 0) p.first_trade = j;
    if (events[j].child + 1 == p.offsets.size()) p.last_trade = j;
  }

  // Daily parameters; V_D is the generated volume of the day.
  std::vector<PlantedDay> days(sc.n_days);
  {
    auto rng = substream(sc.seed, "days");
    std::normal_distribution<double> normal;
    std::vector<std::int64_t> vol(sc.n_days, 0);
    for (const Event& e : events) vol[static_cast<std::size_t>(day_of(e.time) - sc.start_day)] += plans[e.plan].sizes[e.child];
    for (std::size_t d = 0; d < sc.n_days; ++d) {
      days[d].day = sc.start_day + static_cast<std::int64_t>(d);
      days[d].y = sc.y0 + sc.sigma_y * normal(rng);
      days[d].sigma = sc.sigma_daily * std::exp(sc.sigma_dispersion * normal(rng) -
                                                0.5 * sc.sigma_dispersion * sc.sigma_dispersion);
      days[d].v_d = static_cast<double>(vol[d]) * vunit;
      days[d].y_tilde = days[d].v_d > 0.0 ? days[d].y * days[d].sigma / std::pow(days[d].v_d, sc.delta) : 0.0;
    }
  }
  auto day_index = [&](std::int64_t t) { return static_cast<std::size_t>(day_of(t) - sc.start_day); };
  for (Plan& p : plans) p.prefactor = days[day_index(p.t_start + p.offsets.back())].y_tilde;

  // Impact component at every trade, before the trade prints.
  std::vector<double> impact(n_trades, 0.0);
  {
    struct Live {
      std::uint32_t plan;
      std::int64_t executed;
      bool done;
      std::int64_t t_end;
      double tau_ns;
      double value;  // current contribution while executing, full contribution once done
    };
    const bool own_flow = sc.response == "own_flow";
    auto contribution = [&](const Plan& p, std::int64_t executed) {
      const double c = static_cast<double>(executed) * vunit;
      return own_flow ? p.sign * p.prefactor * std::pow(c, sc.delta) : p.sign * c;
    };
    std::vector<Live> live;
    double permanent = 0.0;  // own_flow: impact units; aggregate: flow units
    for (std::size_t j = 0; j < n_trades; ++j) {
      const Event& e = events[j];
      const std::int64_t t = e.time;
      double acc = permanent;
      std::size_t keep = 0;
      for (std::size_t x = 0; x < live.size(); ++x) {
        const Live& l = live[x];
        if (!l.done) {
          acc += l.value;
          live[keep++] = l;
          continue;
        }
        const double age = static_cast<double>(t - l.t_end) / l.tau_ns;
        if (age > 15.0) {
          permanent += l.value * sc.pi_inf;
          acc += l.value * sc.pi_inf;
          continue;
        }
        acc += l.value * (sc.pi_inf + (1.0 - sc.pi_inf) * std::exp(-age));
        live[keep++] = l;
      }
      live.resize(keep);
      if (own_flow) {
        impact[j] = acc;
      } else {
        const double yt = days[day_index(t)].y_tilde;
        impact[j] = acc == 0.0 ? 0.0 : yt * (acc > 0 ? 1.0 : -1.0) * std::pow(std::fabs(acc), sc.delta);
      }

      const Plan& p = plans[e.plan];
      if (p.background && !sc.background_impact) continue;
      if (e.child == 0) {
        const double tau = std::max(sc.decay_multiple * p.duration_ns, sc.min_decay_seconds * 1e9);
        live.push_back({e.plan, 0, false, 0, tau, 0.0});
      }
      for (std::size_t x = live.size(); x-- > 0;) {
        Live& l = live[x];
        if (l.plan != e.plan) continue;
        l.executed += p.sizes[e.child];
        l.value = contribution(p, l.executed);
        if (e.child + 1 == p.offsets.size()) {
          l.done = true;
          l.t_end = t;
        }
        break;
      }
    }
  }

  // Diffusive noise, per day.
  std::vector<double> noise(n_trades, 0.0);
  {
    for (PlantedDay& d : days) {
      d.rv_impact = 0.0;
      d.noise_sigma = sc.noise_mode == "fixed" ? sc.noise_sigma : 0.0;
    }
    if (sc.noise_mode == "calibrated") {
      const std::int64_t bin = 300 * kNanosPerSecond;
      std::size_t j = 0;
      while (j < n_trades) {
        const std::size_t d = day_index(events[j].time);
        bool have_prev = false;
        double prev = 0.0;
        while (j < n_trades && day_index(events[j].time) == d) {
          const std::int64_t b = events[j].time / bin;
          std::size_t last = j;
          while (last + 1 < n_trades && events[last + 1].time / bin == b) ++last;
          const double v = impact[last];
          if (have_prev) days[d].rv_impact += (v - prev) * (v - prev);
          prev = v;
          have_prev = true;
          j = last + 1;
        }
      }
      for (PlantedDay& d : days) {
        const double target = d.sigma * d.sigma;
        d.noise_sigma = std::sqrt(std::max(target - d.rv_impact, sc.noise_floor * target));
      }
    }
    auto rng = substream(sc.seed, "noise");
    std::normal_distribution<double> normal;
    double w = 0.0;
    for (std::size_t j = 1; j < n_trades; ++j) {
      const std::int64_t dt = events[j].time - events[j - 1].time;
      const double s = days[day_index(events[j].time)].noise_sigma;
      if (dt > 0 && s > 0.0) w += s * std::sqrt(static_cast<double>(dt) / static_cast<double>(kNanosPerDay)) * normal(rng);
      noise[j] = w;
    }
  }

  // Print trades.
  std::vector<Trade> trades(n_trades);
  {
    auto rng = substream(sc.seed, "passive");
    std::uniform_int_distribution<TraderId> passive(3'000'000'000U, 3'000'999'999U);
    const double log_p0 = std::log(sc.initial_price);
    const double h = 0.5 * sc.spread;
    for (std::size_t j = 0; j < n_trades; ++j) {
      const Event& e = events[j];
      const Plan& p = plans[e.plan];
      const double mid = std::exp(log_p0 + impact[j] + noise[j]);
      Trade& t = trades[j];
      t.timestamp = e.time;
      t.trade_id = j + 1;
      t.aggressor_id = p.trader;
      t.passive_id = passive(rng);
      t.side = p.sign > 0 ? Side::Buy : Side::Sell;
      t.volume = p.sizes[e.child];
      t.price = double_to_scaled(mid * (1.0 + p.sign * h), sc.price_exponent);
      if (sc.spread > 0.0) {
        t.best_bid = double_to_scaled(mid * (1.0 - h), sc.price_exponent);
        t.best_ask = double_to_scaled(mid * (1.0 + h), sc.price_exponent);
      }
    }
  }

  // Planted metaorders in segmenter order.
  std::vector<std::size_t> order(plans.size());
  for (std::size_t i = 0; i < plans.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return plans[a].t_start != plans[b].t_start ? plans[a].t_start < plans[b].t_start
                                                : plans[a].first_trade < plans[b].first_trade;
  });
  SyntheticOutput out;
  GroundTruth& gt = out.truth;
  gt.trade_metaorder.assign(n_trades, kUnassigned);
  gt.metaorders.resize(plans.size());
  double pref_sum = 0.0;
  std::size_t pref_n = 0;
  for (std::size_t id = 0; id < order.size(); ++id) {
    Plan& p = plans[order[id]];
    p.id = id;
    PlantedMetaOrder& m = gt.metaorders[id];
    m.id = id;
    m.trader_id = p.trader;
    m.sign = p.sign;
    m.volume = p.volume;
    m.t_start = p.t_start;
    m.t_end = p.t_start + p.offsets.back();
    m.n_children = static_cast<std::uint32_t>(p.offsets.size());
    m.background = p.background;
    m.prefactor = p.prefactor;
    m.planted_peak = p.prefactor * std::pow(static_cast<double>(p.volume) * vunit, sc.delta);
    if (!p.background) {
      pref_sum += p.prefactor;
      ++pref_n;
    }
  }
  for (std::size_t j = 0; j < n_trades; ++j) gt.trade_metaorder[j] = plans[events[j].plan].id;
  gt.mean_prefactor = pref_n > 0 ? pref_sum / static_cast<double>(pref_n) : 0.0;
  gt.days = std::move(days);

  TapeMetadata meta;
  meta.price_exponent = sc.price_exponent;
  meta.volume_exponent = sc.volume_exponent;
  meta.tick = sc.tick;
  meta.instrument = "SYNTH/USD";
  out.tape = Tape(std::move(meta), std::move(trades));
  return out;
}

void write_ground_truth_csv(const Tape& tape, const GroundTruth& truth, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(fmt::format("cannot write {}", path));
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "trade_id,metaorder_id\n");
  for (std::size_t i = 0; i < tape.size(); ++i) {
    if (truth.trade_metaorder[i] == kUnassigned) {
      fmt::format_to(std::back_inserter(buf), "{},\n", tape[i].trade_id);
    } else {
      fmt::format_to(std::back_inserter(buf), "{},{}\n", tape[i].trade_id, truth.trade_metaorder[i]);
    }
  }
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void write_planted_metaorders_csv(const GroundTruth& truth, int volume_exponent, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(fmt::format("cannot write {}", path));
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf),
                 "id,trader_id,sign,Q,t_start,t_end,n_children,background,prefactor,planted_peak\n");
  for (const PlantedMetaOrder& m : truth.metaorders) {
    fmt::format_to(std::back_inserter(buf), "{},{},{},{},{},{},{},{},{},{}\n", m.id, m.trader_id, m.sign,
                   format_scaled(m.volume, volume_exponent), m.t_start, m.t_end, m.n_children, m.background ? 1 : 0,
                   m.prefactor, m.planted_peak);
  }
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void write_planted_days_csv(const GroundTruth& truth, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(fmt::format("cannot write {}", path));
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "date,y,sigma,V_D,y_tilde,noise_sigma,rv_impact\n");
  for (const PlantedDay& d : truth.days) {
    fmt::format_to(std::back_inserter(buf), "{},{},{},{},{},{},{}\n", format_day(d.day), d.y, d.sigma, d.v_d, d.y_tilde,
                   d.noise_sigma, d.rv_impact);
  }
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

}  // namespace metaimpact
