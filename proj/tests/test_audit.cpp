#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "calibkit/audit.hpp"
#include "calibkit/confidence.hpp"
#include "calibkit/metrics.hpp"
#include "calibkit/synth.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace calibkit;

TEST_SUITE("audit") {
  TEST_CASE("D=1 audit equals the scalar metric report") {
    std::mt19937_64 rng(1);
    const auto s = oracle::distinct_samples(rng, 300);
    DimSamples d;
    for (const auto& x : s) {
      d.per_dim_confidence.push_back({x.confidence});
      d.outcomes.push_back(x.outcome);
    }
    const auto a = dimension_audit(d, 10);
    const auto r = metric_report(s, 10);
    REQUIRE(a.per_dim.size() == 1);
    CHECK(a.per_dim[0].ece1 == r.ece1);
    CHECK(a.per_dim[0].brier == r.brier);
    CHECK(a.per_dim[0].nll == r.nll);
    CHECK(a.per_dim[0].n == 300);
  }

  TEST_CASE("identical columns give identical rows") {
    std::mt19937_64 rng(2);
    const auto s = oracle::distinct_samples(rng, 100);
    DimSamples d;
    for (const auto& x : s) {
      d.per_dim_confidence.push_back({x.confidence, x.confidence, x.confidence});
      d.outcomes.push_back(x.outcome);
    }
    const auto a = dimension_audit(d, 5);
    for (const auto& row : a.per_dim) {
      CHECK(row.ece1 == a.per_dim[0].ece1);
      CHECK(row.brier == a.per_dim[0].brier);
      CHECK(row.nll == a.per_dim[0].nll);
    }
    CHECK(a.ece1_spread() == 1.0);
  }

  TEST_CASE("property: audit is column-permutation equivariant") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 30; ++rep) {
      const std::size_t dims = 2 + rng() % 6;
      DimSamples d;
      for (int i = 0; i < 80; ++i) {
        std::vector<double> row(dims);
        for (double& x : row) x = u(rng);
        d.per_dim_confidence.push_back(row);
        d.outcomes.push_back(static_cast<int>(rng() % 2));
      }
      std::vector<std::size_t> perm(dims);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      DimSamples p = d;
      for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t k = 0; k < dims; ++k) p.per_dim_confidence[i][k] = d.per_dim_confidence[i][perm[k]];
      const auto a = dimension_audit(d, 8);
      const auto b = dimension_audit(p, 8);
      for (std::size_t k = 0; k < dims; ++k) {
        CHECK(b.per_dim[k].dim_index == k);
        CHECK(b.per_dim[k].ece1 == a.per_dim[perm[k]].ece1);
        CHECK(b.per_dim[k].nll == a.per_dim[perm[k]].nll);
      }
    }
  }

  TEST_CASE("property: spearman matches the counting oracle") {
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 300; ++rep) {
      const std::size_t n = 3 + rng() % 20;
      std::vector<double> x(n), y(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = static_cast<double>(rng() % 6);
        y[i] = static_cast<double>(rng() % 6);
      }
      const auto s = spearman(x, y);
      const bool const_x = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
      const bool const_y = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
      if (const_x || const_y) {
        CHECK_FALSE(s.has_value());
        continue;
      }
      REQUIRE(s.has_value());
      CHECK(std::abs(*s - oracle::spearman(x, y)) <= 1e-12);
    }
    CHECK(*spearman(std::vector<double>{1, 2, 3}, std::vector<double>{10, 20, 30}) == doctest::Approx(1.0));
    CHECK(*spearman(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) == doctest::Approx(-1.0));
    CHECK_FALSE(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}).has_value());
  }

  TEST_CASE("comparison table degenerate groupings") {
    const std::vector<ConfidenceSample> s{{0.9, 1}, {0.2, 0}, {0.6, 1}, {0.7, 0}};
    const std::vector<SampleGroup> two{{"a", s}, {"b", s}};
    const CompareTable t = success_vs_calibration_table(two, 2);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].ece1 == t.rows[1].ece1);
    CHECK(t.rows[0].task_error_rate == 0.5);
    CHECK(t.rows[1].label == "b");
    CHECK_FALSE(t.correlation.ece1.has_value());
    const CompareTable one = success_vs_calibration_table(std::span(two).first(1), 2);
    CHECK(one.rows.size() == 1);
    CHECK_FALSE(one.correlation.brier.has_value());
    const std::vector<SampleGroup> empty{{"a", s}, {"e", {}}};
    CHECK_THROWS_AS(success_vs_calibration_table(empty, 2), Error);
  }

  TEST_CASE("rows do not depend on group order") {
    std::mt19937_64 rng(6);
    std::vector<SampleGroup> g;
    for (int i = 0; i < 5; ++i) g.push_back({"g" + std::to_string(i), oracle::distinct_samples(rng, 40)});
    const CompareTable a = success_vs_calibration_table(g, 4);
    std::reverse(g.begin(), g.end());
    const CompareTable b = success_vs_calibration_table(g, 4);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(a.rows[i].label == b.rows[4 - i].label);
      CHECK(a.rows[i].ece1 == b.rows[4 - i].ece1);
      CHECK(a.rows[i].nll == b.rows[4 - i].nll);
    }
    CHECK(*a.correlation.ece1 == doctest::Approx(*b.correlation.ece1));
  }

  TEST_CASE("distortion that lowers success raises calibration error") {
    std::vector<SampleGroup> groups;
    for (int g = 0; g < 9; ++g) {
      SynthConfig cfg = preset("perfect");
      cfg.link.kind = SuccessLink::Kind::platt;
      cfg.link.platt = {4.0, -2.0 - 0.3 * g};
      cfg.n_episodes = 2000;
      cfg.seed = 100 + g;
      SampleGroup group{"g" + std::to_string(g), {}};
      for (const auto& e : generate(cfg).episodes) group.samples.push_back(trial_confidence(e, TrialAggregation::pre_action));
      groups.push_back(std::move(group));
    }
    const CompareTable t = success_vs_calibration_table(groups, 12);
    REQUIRE(t.correlation.ece1.has_value());
    CHECK(*t.correlation.ece1 > 0.0);
  }
}
