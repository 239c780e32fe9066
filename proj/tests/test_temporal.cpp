#include <cmath>
#include <random>

#include "calibkit/confidence.hpp"
#include "calibkit/metrics.hpp"
#include "calibkit/synth.hpp"
#include "calibkit/temporal.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace calibkit;

namespace {

/// Mean of series[lo..t] (1-based, inclusive) by plain summation.
double window_mean(const std::vector<double>& s, std::size_t lo, std::size_t t) {
  double sum = 0.0;
  for (std::size_t i = lo; i <= t; ++i) sum += s[i - 1];
  return sum / static_cast<double>(t - lo + 1);
}

}  // namespace

TEST_SUITE("temporal") {
  TEST_CASE("completion to timestep") {
    const EpisodeRecord long_ep = oracle::episode_from(std::vector<double>(200, 0.5), 1);
    CHECK(timestep_at_completion(long_ep, 50) == 101);
    CHECK(timestep_at_completion(long_ep, 0) == 1);
    CHECK(timestep_at_completion(long_ep, 99) == 199);
    const EpisodeRecord one = oracle::episode_from({0.5}, 1);
    for (int pct : {0, 37, 99}) CHECK(timestep_at_completion(one, pct) == 1);
    CHECK_THROWS_AS(timestep_at_completion(one, 100), Error);
    CHECK_THROWS_AS(timestep_at_completion(one, -1), Error);
  }

  TEST_CASE("property: completion_of_timestep maps each step back onto a level selecting it") {
    for (std::size_t horizon = 1; horizon <= 250; ++horizon) {
      const EpisodeRecord e = oracle::episode_from(std::vector<double>(horizon, 0.5), 0);
      int prev = -1;
      for (std::size_t t = 1; t <= horizon; ++t) {
        const int pct = completion_of_timestep(t, horizon);
        CHECK(pct >= 0);
        CHECK(pct <= 99);
        CHECK(pct >= prev);
        prev = pct;
        // Steps that some level selects are recovered exactly.
        bool selected = false;
        for (int p = 0; p < 100; ++p) selected |= timestep_at_completion(e, p) == t;
        if (selected) CHECK(timestep_at_completion(e, pct) == t);
      }
    }
  }

  TEST_CASE("aggregation fixtures") {
    const EpisodeRecord e = oracle::episode_from({0.9, 0.5, 0.7}, 1);
    for (auto agg : {TemporalAggregation::current(), TemporalAggregation::windowed(5), TemporalAggregation::avg_all()}) {
      CHECK(aggregated_confidence(e, 1, agg) == 0.9);
    }
    CHECK(std::abs(aggregated_confidence(e, 3, TemporalAggregation::windowed(5)) - 0.7) <= 1e-15);
    CHECK(std::abs(aggregated_confidence(e, 3, TemporalAggregation::avg_all()) - 0.7) <= 1e-15);
    CHECK(aggregated_confidence(e, 3, TemporalAggregation::current()) == 0.7);
    CHECK(std::abs(aggregated_confidence(e, 3, TemporalAggregation::windowed(2)) - 0.6) <= 1e-15);
    CHECK_THROWS_AS(aggregated_confidence(e, 4, TemporalAggregation::current()), Error);
    CHECK_THROWS_AS(aggregated_confidence(e, 0, TemporalAggregation::current()), Error);
    CHECK_THROWS_AS(aggregated_confidence(e, 1, TemporalAggregation::windowed(0)), Error);
  }

  TEST_CASE("property: window and avg_all against direct means") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<double> s(1 + rng() % 40);
      for (double& x : s) x = u(rng);
      const EpisodeRecord e = oracle::episode_from(s, 1);
      const std::size_t w = 1 + rng() % 8;
      for (std::size_t t = 1; t <= s.size(); ++t) {
        const std::size_t lo = t >= w ? t - w + 1 : 1;
        CHECK(std::abs(aggregated_confidence(e, t, TemporalAggregation::windowed(w)) - window_mean(s, lo, t)) <= 1e-12);
        CHECK(std::abs(aggregated_confidence(e, t, TemporalAggregation::avg_all()) - window_mean(s, 1, t)) <= 1e-12);
        CHECK(aggregated_confidence(e, t, TemporalAggregation::windowed(s.size() + w)) ==
              doctest::Approx(aggregated_confidence(e, t, TemporalAggregation::avg_all())).epsilon(1e-14));
      }
      CHECK(std::abs(aggregated_confidence(e, s.size(), TemporalAggregation::avg_all()) -
                     trial_confidence(e, TrialAggregation::mean).confidence) <= 1e-12);
    }
  }

  TEST_CASE("curve over constant episodes is flat with equal n") {
    std::vector<EpisodeRecord> eps;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 40; ++i) eps.push_back(oracle::episode_from(std::vector<double>(5 + i % 7, 0.6), i % 3 == 0));
    const CompletionCurve c = completion_curve(eps, TemporalAggregation::current(), 4);
    REQUIRE(c.points.size() == 100);
    for (int p = 0; p < 100; ++p) {
      CHECK(c.points[p].completion_pct == p);
      CHECK(c.points[p].n == eps.size());
      CHECK(c.points[p].ece1 == c.points[0].ece1);
      CHECK(c.points[p].brier == c.points[0].brier);
    }
    CHECK_THROWS_AS(completion_curve(std::span(eps).first(3), TemporalAggregation::current(), 4), Error);
  }

  TEST_CASE("pct 0 reproduces the pre-action metric pipeline") {
    SynthConfig cfg = preset("discriminative");
    cfg.n_episodes = 300;
    cfg.seed = 4;
    const auto eps = generate(cfg).episodes;
    std::vector<ConfidenceSample> pre;
    for (const auto& e : eps) pre.push_back(trial_confidence(e, TrialAggregation::pre_action));
    const BinnedDiagram a = reliability_at(eps, 0, TemporalAggregation::avg_all(), 10);
    const BinnedDiagram b = equal_mass_bins(pre, 10);
    REQUIRE(a.bins.size() == b.bins.size());
    for (std::size_t j = 0; j < a.bins.size(); ++j) {
      CHECK(a.bins[j].count == b.bins[j].count);
      CHECK(a.bins[j].mean_confidence == b.bins[j].mean_confidence);
      CHECK(a.bins[j].mean_accuracy == b.bins[j].mean_accuracy);
    }
    const CompletionCurve c = completion_curve(eps, TemporalAggregation::current(), 10);
    CHECK(c.points[0].ece1 == ece(pre, 1, 10));
  }

  TEST_CASE("discriminative episodes trace higher confidence on successes") {
    SynthConfig cfg = preset("discriminative");
    cfg.n_episodes = 2000;
    cfg.seed = 8;
    const auto eps = generate(cfg).episodes;
    const CompletionCurve c = completion_curve(eps, TemporalAggregation::windowed(5), 12);
    for (const auto& p : c.points) {
      REQUIRE(p.mean_conf_success.has_value());
      REQUIRE(p.mean_conf_failure.has_value());
      CHECK(*p.mean_conf_success >= *p.mean_conf_failure);
    }
  }

  TEST_CASE("curve is deterministic") {
    SynthConfig cfg = preset("sharpening");
    cfg.n_episodes = 200;
    const auto eps = generate(cfg).episodes;
    const CompletionCurve a = completion_curve(eps, TemporalAggregation::avg_all(), 10);
    const CompletionCurve b = completion_curve(eps, TemporalAggregation::avg_all(), 10);
    for (int p = 0; p < 100; ++p) {
      CHECK(a.points[p].ece1 == b.points[p].ece1);
      CHECK(a.points[p].brier == b.points[p].brier);
    }
  }

  TEST_CASE("reliability bins at a calibrated level are within binomial noise") {
    SynthConfig cfg = preset("perfect");
    cfg.n_episodes = 3000;
    cfg.seed = 12;
    const auto eps = generate(cfg).episodes;
    const BinnedDiagram d = reliability_at(eps, 0, TemporalAggregation::current(), 10);
    std::size_t lo = d.bins[0].count, hi = d.bins[0].count;
    int outside = 0;
    for (const auto& b : d.bins) {
      lo = std::min(lo, b.count);
      hi = std::max(hi, b.count);
      outside += std::abs(b.mean_accuracy - b.mean_confidence) >= 3.0 / std::sqrt(static_cast<double>(b.count));
    }
    CHECK(hi - lo <= 1);
    CHECK(outside <= 1);
  }
}
