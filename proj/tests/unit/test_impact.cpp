#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "metaimpact/error.hpp"
#include "metaimpact/event_study.hpp"
#include "metaimpact/impact.hpp"
#include "metaimpact/parallel.hpp"
#include "metaimpact/segmenter.hpp"
#include "metaimpact/synthgen.hpp"
#include "toy.hpp"

using namespace metaimpact;
using toy::B;
using toy::S;

namespace {

struct World {
  Tape tape;
  MarketIndex index;
  MetaOrderSet set;
  explicit World(Tape t) : tape(std::move(t)), index(tape), set(segment(tape, index, {}).metaorders) {}
};

SyntheticScenario busy_scenario(std::uint64_t seed = 1) {
  SyntheticScenario sc;
  sc.seed = seed;
  sc.n_days = 2;
  sc.n_traders = 200;
  sc.metaorders_per_trader_per_day = 3.0;
  sc.base_daily_volume = 200;
  sc.mu_median = 0.05;
  return sc;
}

// Flip every side and map p -> K/p: log-returns and signs both change sign.
Tape mirrored(const Tape& tape) {
  std::vector<Trade> out(tape.trades().begin(), tape.trades().end());
  const double k = 1e22;
  for (Trade& t : out) {
    t.side = opposite(t.side);
    t.price = std::llround(k / static_cast<double>(t.price));
    if (t.has_quotes()) {
      const std::int64_t bid = std::llround(k / static_cast<double>(t.best_ask));
      const std::int64_t ask = std::llround(k / static_cast<double>(t.best_bid));
      t.best_bid = bid;
      t.best_ask = ask;
    }
  }
  return Tape(tape.metadata(), std::move(out));
}

Tape rescaled(const Tape& tape, std::int64_t factor) {
  std::vector<Trade> out(tape.trades().begin(), tape.trades().end());
  for (Trade& t : out) {
    t.price *= factor;
    if (t.has_quotes()) {
      t.best_bid *= factor;
      t.best_ask *= factor;
    }
  }
  return Tape(tape.metadata(), std::move(out));
}

}  // namespace

TEST_SUITE("impact") {
  TEST_CASE("market imbalance toy cases") {
    const Tape t = toy::tape({{0, 1, B, 100, 5}, {1, 2, B, 100, 3}, {2, 3, S, 100, 2}});
    const MarketIndex index(t);
    CHECK(market_imbalance(index, {0, 2'000'000'000}) == 600'000'000);
    CHECK(market_imbalance(index, {5'000'000'000, 9'000'000'000}) == 0);
    CHECK(market_imbalance(index, {1'000'000'000, 1'000'000'000}) == 300'000'000);
  }

  TEST_CASE("market imbalance equals a naive rescan on random windows") {
    const SyntheticOutput out = generate(busy_scenario());
    const MarketIndex index(out.tape);
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::int64_t> t(index.first_time() - 1000, index.last_time() + 1000);
    for (int k = 0; k < 200; ++k) {
      std::int64_t a = t(rng), b = t(rng);
      if (a > b) std::swap(a, b);
      CHECK(market_imbalance(index, {a, b}) == reference::market_imbalance(out.tape, {a, b}));
    }
  }

  TEST_CASE("single fill path is flat zero") {
    const World w(toy::tape({{0, 1, B, 100, 1}}));
    const auto path = impact_path(w.tape, w.set, w.set[0]);
    REQUIRE(path.size() == 41);
    for (const ImpactSample& s : path) CHECK(s.impact == 0.0);
  }

  TEST_CASE("two equal fills at 100 then 101") {
    const World w(toy::tape({{0, 1, B, 100, 1}, {10, 1, B, 101, 1}}));
    const auto path = impact_path(w.tape, w.set, w.set[0]);
    for (const ImpactSample& s : path) {
      const double expect = s.r <= 0.5 ? 0.0 : std::log(1.01);
      CHECK(s.impact == doctest::Approx(expect).epsilon(1e-12));
    }
    CHECK(path[0].impact == 0.0);
    CHECK(path[20].r == 0.5);
    CHECK(path[40].clock == doctest::Approx(10.0));
  }

  TEST_CASE("sell metaorders are sign adjusted") {
    const World w(toy::tape({{0, 1, S, 100, 1}, {10, 1, S, 99, 1}}));
    const auto path = impact_path(w.tape, w.set, w.set[0]);
    CHECK(path.back().impact == doctest::Approx(-std::log(0.99)));
  }

  TEST_CASE("kernel summaries equal the serial reference") {
    const SyntheticOutput out = generate(busy_scenario(3));
    const World w(out.tape);
    const ImpactTable fast = compute_impacts(w.tape, w.index, w.set);
    const ImpactTable slow = reference::compute_impacts(w.tape, w.set);
    REQUIRE(fast.summaries.size() == slow.summaries.size());
    CHECK(fast.path_row == slow.path_row);
    CHECK(fast.paths == slow.paths);
    for (std::size_t i = 0; i < fast.summaries.size(); ++i) {
      const ImpactSummary& a = fast.summaries[i];
      const ImpactSummary& b = slow.summaries[i];
      CHECK(a.peak == b.peak);
      CHECK(a.exec == doctest::Approx(b.exec).epsilon(1e-12).scale(1e-9));
      REQUIRE(a.perm.has_value() == b.perm.has_value());
      if (a.perm) CHECK(std::fabs(*a.perm - *b.perm) < 1e-10);
    }
  }

  TEST_CASE("summary invariants") {
    const SyntheticOutput out = generate(busy_scenario(4));
    const World w(out.tape);
    const ImpactTable table = compute_impacts(w.tape, w.index, w.set);
    std::size_t with_perm = 0;
    for (std::size_t i = 0; i < table.summaries.size(); ++i) {
      const ImpactSummary& s = table.summaries[i];
      const auto path = table.path(i);
      const auto [lo, hi] = std::minmax_element(path.begin(), path.end());
      CHECK(path[0] == 0.0);
      CHECK(s.peak == path.back());
      CHECK(s.exec >= *lo);
      CHECK(s.exec <= *hi);
      CHECK(std::isfinite(s.peak));
      if (s.perm) {
        ++with_perm;
        REQUIRE(s.perm_mech.has_value());
        CHECK(*s.perm_mech == s.peak - *s.perm);
      }
      if (!w.set[i].has_duration()) CHECK_FALSE(s.perm.has_value());
    }
    CHECK(with_perm > 100);
  }

  TEST_CASE("permanent impact reads the traded price in the late window") {
    // T = 10 s; window [t_end + 90, t_end + 100] = [100, 110].
    const Tape t = toy::tape({{0, 1, B, 100, 1},
                              {10, 1, B, 101, 1},
                              {50, 2, S, 120, 1},
                              {100, 3, B, 102, 1},
                              {105, 4, S, 104, 3},
                              {200, 5, B, 90, 1}});
    const World w(t);
    const ImpactTable table = compute_impacts(w.tape, w.index, w.set);
    REQUIRE(table.summaries[0].perm.has_value());
    CHECK(*table.summaries[0].perm == doctest::Approx(std::log((102.0 + 3 * 104.0) / 4.0 / 100.0)));
  }

  TEST_CASE("permanent window past the tape end is unset") {
    const World w(toy::tape({{0, 1, B, 100, 1}, {10, 1, B, 101, 1}, {50, 2, S, 120, 1}}));
    CHECK_FALSE(compute_impacts(w.tape, w.index, w.set).summaries[0].perm.has_value());
  }

  TEST_CASE("sign symmetry: mirrored tape gives the same statistics") {
    const SyntheticOutput out = generate(busy_scenario(6));
    const World a(out.tape);
    const World b(mirrored(out.tape));
    REQUIRE(a.set.size() == b.set.size());
    const ImpactTable ta = compute_impacts(a.tape, a.index, a.set);
    const ImpactTable tb = compute_impacts(b.tape, b.index, b.set);
    for (std::size_t i = 0; i < ta.summaries.size(); ++i) {
      CHECK(a.set[i].sign == -b.set[i].sign);
      // K/p is rounded to whole scaled units: ~1e-11 in log terms.
      CHECK(std::fabs(ta.summaries[i].peak - tb.summaries[i].peak) < 1e-10);
      CHECK(std::fabs(ta.summaries[i].exec - tb.summaries[i].exec) < 1e-10);
    }
    const Isolation ia = select_isolated(a.set, a.index);
    const Isolation ib = select_isolated(b.set, b.index);
    CHECK(ia.labels == ib.labels);
  }

  TEST_CASE("price scale invariance") {
    const SyntheticOutput out = generate(busy_scenario(7));
    const World a(out.tape);
    const World b(rescaled(out.tape, 4));
    const ImpactTable ta = compute_impacts(a.tape, a.index, a.set);
    const ImpactTable tb = compute_impacts(b.tape, b.index, b.set);
    for (std::size_t i = 0; i < ta.summaries.size(); ++i) {
      CHECK(ta.summaries[i].peak == doctest::Approx(tb.summaries[i].peak).epsilon(1e-12).scale(1e-6));
      if (ta.summaries[i].perm) {
        CHECK(*ta.summaries[i].perm == doctest::Approx(*tb.summaries[i].perm).epsilon(1e-12).scale(1e-6));
      }
    }
  }

  TEST_CASE("worker count does not change summaries") {
    const SyntheticOutput out = generate(busy_scenario(8));
    const World w(out.tape);
    parallel::set_workers(1);
    const ImpactTable one = compute_impacts(w.tape, w.index, w.set);
    parallel::set_workers(8);
    const ImpactTable eight = compute_impacts(w.tape, w.index, w.set);
    parallel::set_workers(0);
    CHECK(one.path_row == eight.path_row);
    CHECK(one.paths == eight.paths);
  }
}

TEST_SUITE("impact curves") {
  TEST_CASE("log bins") {
    CHECK(log_bin(1.0, 8) == 0);
    CHECK(log_bin(10.0, 8) == 8);
    CHECK(log_bin(0.99, 8) == -1);
  }

  TEST_CASE("exact square-root population gives c*sqrt per bin") {
    // Metaorders of two equal fills with p2 = p1*exp(c*sqrt(Q)).
    const double c = 0.004;
    std::vector<toy::Row> rows;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> lq(-1.0, 3.0);
    for (TraderId k = 0; k < 4000; ++k) {
      const double q = std::round(std::pow(10.0, lq(rng)) * 1e4) / 1e4;
      const double t0 = 10.0 * k;
      rows.push_back({t0, k, B, 100, q / 2});
      rows.push_back({t0 + 1, k, B, 100 * std::exp(c * std::sqrt(q)), q / 2});
    }
    const World w(toy::tape(rows));
    const ImpactTable table = compute_impacts(w.tape, w.index, w.set);
    LogBinning bins;
    bins.n_min = 20;
    const PeakImpactCurve curve = peak_impact_curve(table, w.set, bins, false);
    REQUIRE(curve.points.size() >= 30);
    for (const CurvePoint& p : curve.points) {
      CHECK(p.mean == doctest::Approx(c * std::sqrt(p.q_mean)).epsilon(0.01));
      CHECK(p.n >= 20);
      CHECK(p.q_lo <= p.q_mean);
      CHECK(p.q_mean < p.q_hi);
    }
    const auto mid = curve.evaluate(3.0);
    REQUIRE(mid.has_value());
    CHECK(*mid == doctest::Approx(c * std::sqrt(3.0)).epsilon(0.01));
    CHECK_FALSE(curve.evaluate(1e6).has_value());
  }

  TEST_CASE("under-populated curve is an error") {
    const World w(toy::tape({{0, 1, B, 100, 1}, {1, 1, B, 101, 1}}));
    const ImpactTable table = compute_impacts(w.tape, w.index, w.set);
    CHECK_THROWS_AS(peak_impact_curve(table, w.set, LogBinning{}, false), DataError);
  }

  TEST_CASE("in-trajectory samples enter at r*Q") {
    const World w(toy::tape({{0, 1, B, 100, 1}, {10, 1, B, 101, 1}}));
    const ImpactTable table = compute_impacts(w.tape, w.index, w.set);
    LogBinning bins;
    bins.n_min = 1;
    const PeakImpactCurve plain = peak_impact_curve(table, w.set, bins, false);
    const PeakImpactCurve traj = peak_impact_curve(table, w.set, bins, true);
    std::size_t n_plain = 0, n_traj = 0;
    for (const auto& p : plain.points) n_plain += p.n;
    for (const auto& p : traj.points) n_traj += p.n;
    CHECK(n_plain == 1);
    CHECK(n_traj == 40);  // samples r > 0; the r = 1 sample is the peak itself
  }

  TEST_CASE("one metaorder with I = 0.02 and |Q| = 4 gives a daily Y~ of 0.01") {
    const World w(toy::tape({{0, 1, B, 100, 2}, {10, 1, B, 100 * std::exp(0.02), 2}, {400, 2, S, 101, 1}}));
    const ImpactTable table = compute_impacts(w.tape, w.index, w.set);
    const auto days = daily_aggregates(w.tape);
    const auto liq = daily_liquidity_series(table, w.set, days);
    REQUIRE(liq.size() == 1);
    CHECK(liq[0].y_tilde == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(liq[0].n_metaorders == 1);
    REQUIRE(liq[0].y_ratio.has_value());
    CHECK(*liq[0].y_ratio == doctest::Approx(0.01 / (days[0].sigma / std::sqrt(5.0))).epsilon(1e-9));
  }

  TEST_CASE("constant-price day leaves the Y-ratio unset") {
    const World w(toy::tape({{0, 1, B, 100, 2}, {10, 1, B, 100, 2}}));
    const ImpactTable table = compute_impacts(w.tape, w.index, w.set);
    const auto liq = daily_liquidity_series(table, w.set, daily_aggregates(w.tape));
    REQUIRE(liq.size() == 1);
    CHECK_FALSE(liq[0].y_ratio.has_value());
  }

  TEST_CASE("a metaorder alone in the tape sits at mu_V = 1 with imbalance |Q|") {
    const World w(toy::tape({{0, 1, B, 100, 1}, {10, 1, B, 101, 3}}));
    const ImpactTable table = compute_impacts(w.tape, w.index, w.set);
    SurfaceBinning bins;
    bins.n_min = 1;
    const ImpactSurface surf = impact_surface(table, w.set, w.index, bins);
    REQUIRE(surf.cells.size() == 1);
    CHECK(surf.cells[0].muv_mean == doctest::Approx(1.0));
    CHECK(surf.cells[0].muv_bin == 0);
    CHECK(surf.cells[0].mean_imbalance == doctest::Approx(4.0));
    CHECK(surf.cells[0].mean_exec == doctest::Approx(table.summaries[0].exec));
  }

  TEST_CASE("surface counts sum to the contributing metaorders and masking drops values") {
    const SyntheticOutput out = generate(busy_scenario(9));
    const World w(out.tape);
    const ImpactTable table = compute_impacts(w.tape, w.index, w.set);
    const ImpactSurface surf = impact_surface(table, w.set, w.index, SurfaceBinning{});
    std::size_t total = 0, eligible = 0;
    for (const SurfaceCell& c : surf.cells) {
      total += c.n;
      if (c.masked) {
        CHECK(c.n < 50);
        CHECK(c.mean_exec == 0.0);
      }
    }
    for (const MetaOrder& m : w.set.orders()) eligible += m.has_duration();
    CHECK(total == surf.n_contributing);
    CHECK(total == eligible);
  }
}

TEST_SUITE("isolation") {
  TEST_CASE("a metaorder alone in its window is isolated") {
    const World w(toy::tape({{0, 1, B, 100, 1}, {10, 1, B, 101, 1}, {500, 2, S, 100, 1}}));
    const Isolation iso = select_isolated(w.set, w.index);
    CHECK(iso.labels[0] == IsolationLabel::Isolated);
    CHECK(iso.ratio[0] == doctest::Approx(1.0));
    CHECK(iso.labels[1] == IsolationLabel::Excluded);  // T = 0
  }

  TEST_CASE("co-directional residual flow of 3|Q| gives ratio 0.25") {
    const World w(toy::tape({{0, 1, B, 100, 1},
                             {10, 1, B, 101, 1},
                             {20, 2, B, 101, 2},
                             {60, 3, B, 101, 4},
                             {500, 4, S, 100, 1}}));
    const Isolation iso = select_isolated(w.set, w.index);
    CHECK(iso.ratio[0] == doctest::Approx(0.25));
    CHECK(iso.labels[0] == IsolationLabel::Informed);
    IsolationConfig zero;
    zero.threshold = 0.0;
    CHECK(select_isolated(w.set, w.index, zero).labels[0] == IsolationLabel::Isolated);
  }

  TEST_CASE("anti-trending flow still counts as isolated") {
    const World w(toy::tape({{0, 1, B, 100, 2}, {10, 1, B, 101, 2}, {20, 2, S, 101, 1}, {500, 4, B, 100, 1}}));
    const Isolation iso = select_isolated(w.set, w.index);
    CHECK(iso.ratio[0] == doctest::Approx(4.0 / 3.0));
    CHECK(iso.labels[0] == IsolationLabel::Isolated);
  }

  TEST_CASE("window past the tape end excludes the metaorder") {
    const World w(toy::tape({{0, 1, B, 100, 1}, {10, 1, B, 101, 1}, {50, 2, S, 100, 1}}));
    const Isolation iso = select_isolated(w.set, w.index);
    CHECK(iso.labels[0] == IsolationLabel::Excluded);
    CHECK(iso.n_excluded == 2);
  }

  TEST_CASE("threshold extremes") {
    const SyntheticOutput out = generate(busy_scenario(10));
    const World w(out.tape);
    IsolationConfig zero;
    zero.threshold = 0.0;
    const Isolation all = select_isolated(w.set, w.index, zero);
    double max_ratio = 0.0;
    for (std::size_t i = 0; i < w.set.size(); ++i) {
      if (all.labels[i] == IsolationLabel::Excluded) continue;
      const bool co = std::isfinite(all.ratio[i]);
      CHECK((all.labels[i] == IsolationLabel::Isolated) == co);
      if (co) max_ratio = std::max(max_ratio, all.ratio[i]);
    }
    IsolationConfig high;
    high.threshold = max_ratio * 1.01 + 1.0;
    CHECK(select_isolated(w.set, w.index, high).n_isolated == 0);
  }
}

TEST_SUITE("event study") {
  TEST_CASE("single metaorder with flat prices around it") {
    // Execution 100..120 s, window [80, 320] s.
    std::vector<toy::Row> rows{{0, 9, S, 100, 1}, {50, 9, S, 100, 1}};
    rows.push_back({100, 1, B, 100, 1});
    rows.push_back({110, 1, B, 101, 1});
    rows.push_back({120, 1, B, 102, 1});
    for (int k = 0; k < 10; ++k) rows.push_back({130.0 + 30 * k, 8, S, 102, 0.001});
    const World w(toy::tape(rows));
    EventStudyConfig cfg;
    cfg.n_min = 1;
    cfg.by_trend = false;
    const auto curves = event_study(w.tape, w.index, w.set, cfg);
    REQUIRE(curves.size() == 1);
    const EventStudyCurve& c = curves[0];
    CHECK(c.bucket == "all");
    CHECK(c.n == 1);
    CHECK(c.curve("ask") == nullptr);
    const auto& price = *c.curve("price");
    const auto& own = *c.curve("own");
    const auto& total = *c.curve("flow_total");
    const auto& resid = *c.curve("flow_residual");
    const double peak = std::log(1.02);
    for (std::size_t g = 0; g < c.grid.size(); ++g) {
      const double tau = c.grid[g];
      if (tau <= 0.0) CHECK(price[g] == 0.0);
      if (tau >= 1.0) CHECK(price[g] == doctest::Approx(peak));
      CHECK(resid[g] == doctest::Approx(total[g] - own[g]));
      if (tau == 0.0) {
        for (const auto& [name, values] : c.curves) CHECK(values[g] == 0.0);
      }
    }
    CHECK(own.back() == doctest::Approx(1.0));
    CHECK(c.peak == doctest::Approx(peak));
    CHECK(c.permanent == doctest::Approx(peak));
  }

  TEST_CASE("kernel equals the naive reference on a generated tape") {
    SyntheticScenario sc = busy_scenario(11);
    sc.pi_inf = 0.3;
    const SyntheticOutput out = generate(sc);
    const World w(out.tape);
    const Isolation iso = select_isolated(w.set, w.index);
    EventStudyConfig cfg;
    cfg.n_min = 5;
    cfg.by_q = true;
    cfg.by_mu = true;
    const auto fast = event_study(w.tape, w.index, w.set, cfg, &iso);
    const auto slow = reference::event_study(w.tape, w.set, cfg, &iso);
    REQUIRE(fast.size() == slow.size());
    REQUIRE(fast.size() >= 5);
    for (std::size_t b = 0; b < fast.size(); ++b) {
      CHECK(fast[b].bucket == slow[b].bucket);
      CHECK(fast[b].n == slow[b].n);
      REQUIRE(fast[b].curves.size() == slow[b].curves.size());
      for (std::size_t c = 0; c < fast[b].curves.size(); ++c) {
        CHECK(fast[b].curves[c].first == slow[b].curves[c].first);
        const auto& x = fast[b].curves[c].second;
        const auto& y = slow[b].curves[c].second;
        double worst = 0.0;
        for (std::size_t g = 0; g < x.size(); ++g) worst = std::max(worst, std::fabs(x[g] - y[g]));
        INFO(fast[b].bucket, " ", fast[b].curves[c].first);
        CHECK(worst < 1e-10);
      }
    }
  }

  TEST_CASE("buckets below n_min are omitted") {
    const World w(toy::tape({{0, 9, S, 100, 1}, {100, 1, B, 100, 1}, {110, 1, B, 101, 1}, {400, 9, S, 100, 1}}));
    EventStudyConfig cfg;
    CHECK(event_study(w.tape, w.index, w.set, cfg).empty());
  }
}
