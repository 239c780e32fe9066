#include <algorithm>
#include <cmath>
#include <random>

#include "calibkit/confidence.hpp"
#include "calibkit/metrics.hpp"
#include "calibkit/recalibrate.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace calibkit;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

/// Random logits for D dimensions over K tokens; outcomes follow the mean max
/// softmax at temperature t_star.
LogitSamples logit_fixture(std::mt19937_64& rng, std::size_t n, std::size_t dims, std::size_t k, double t_star,
                           bool identical_dims = false) {
  std::normal_distribution<double> z(0.0, 2.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LogitSamples s;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::vector<double>> trial(dims, std::vector<double>(k));
    for (std::size_t d = 0; d < dims; ++d) {
      if (identical_dims && d > 0) {
        trial[d] = trial[0];
        continue;
      }
      for (double& v : trial[d]) v = z(rng);
    }
    double p = 0.0;
    for (const auto& zd : trial) p += oracle::max_softmax(zd, t_star) / static_cast<double>(dims);
    s.outcomes.push_back(u(rng) < p ? 1 : 0);
    s.logits.push_back(std::move(trial));
  }
  return s;
}

DimSamples as_dims(const std::vector<ConfidenceSample>& s) {
  DimSamples d;
  for (const auto& x : s) {
    d.per_dim_confidence.push_back({x.confidence});
    d.outcomes.push_back(x.outcome);
  }
  return d;
}

}  // namespace

TEST_SUITE("recalibrate") {
  TEST_CASE("apply_platt closed forms") {
    CHECK(std::abs(apply_platt(Recalibrator::make_platt({1, 0}), 0.5) - 0.6224593312018546) <= 1e-12);
    CHECK(apply_platt(Recalibrator::make_platt({0, 0}), 0.13) == 0.5);
    const auto r = Recalibrator::make_platt({3, 0});
    CHECK(apply_platt(r, 0.2) < apply_platt(r, 0.8));
    CHECK(code_of([] { apply_platt(Recalibrator::make_temperature(1.0), 0.5); }) == ErrorCode::KindMismatch);
  }

  TEST_CASE("apply_actionwise_platt closed forms") {
    CHECK(apply_actionwise_platt(Recalibrator::make_actionwise_platt({{0, 0}, {0, 0}}), std::vector<double>{0.1, 0.9}) ==
          0.5);
    CHECK(std::abs(apply_actionwise_platt(Recalibrator::make_actionwise_platt({{1, 0}, {1, 0}}),
                                          std::vector<double>{0.5, 0.5}) -
                   0.6224593312018546) <= 1e-12);
    const auto a = Recalibrator::make_actionwise_platt({{2, -1}, {0.5, 0.3}, {4, -2}});
    const auto b = Recalibrator::make_actionwise_platt({{4, -2}, {2, -1}, {0.5, 0.3}});
    CHECK(std::abs(apply_actionwise_platt(a, std::vector<double>{0.1, 0.4, 0.9}) -
                   apply_actionwise_platt(b, std::vector<double>{0.9, 0.1, 0.4})) <= 1e-15);
    CHECK(code_of([&] { apply_actionwise_platt(a, std::vector<double>{0.1}); }) == ErrorCode::DimensionMismatch);
  }

  TEST_CASE("single-class calibration data is degenerate") {
    const std::vector<ConfidenceSample> s{{0.2, 1}, {0.7, 1}, {0.9, 1}};
    CHECK(code_of([&] { fit_platt(s); }) == ErrorCode::Degenerate);
    CHECK(code_of([&] { fit_actionwise_platt(as_dims(s)); }) == ErrorCode::Degenerate);
  }

  TEST_CASE("Platt recovers the generating transform") {
    std::mt19937_64 rng(123);
    const auto s = oracle::logistic_samples(rng, 50000, 2.0, -1.0);
    const Recalibrator r = fit_platt(s);
    CHECK(r.meta.converged);
    CHECK(std::abs(r.platt[0].alpha - 2.0) <= 0.2);
    CHECK(std::abs(r.platt[0].beta + 1.0) <= 0.2);
  }

  TEST_CASE("identity-calibrated data: the fit does not hurt held-out NLL") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.02, 0.98);
    auto draw = [&](std::size_t n) {
      std::vector<ConfidenceSample> s(n);
      for (auto& x : s) {
        x.confidence = u(rng);
        x.outcome = u(rng) < x.confidence ? 1 : 0;
      }
      return s;
    };
    const auto train = draw(20000);
    const auto test = draw(20000);
    const auto r = fit_platt(train);
    CHECK(nll(recalibrate_samples(r, test)) <= nll(test) + 0.01);
  }

  TEST_CASE("property: optimizer NLL is not beaten by the parameter grid") {
    std::mt19937_64 rng(555);
    std::uniform_real_distribution<double> ab(-4.0, 4.0);
    for (int rep = 0; rep < 12; ++rep) {
      const std::size_t n = 50 + rng() % 951;
      auto s = oracle::logistic_samples(rng, n, ab(rng), ab(rng) / 2);
      s[0].outcome = 0;
      s[1].outcome = 1;
      const auto r = fit_platt(s);
      const double f = platt_nll(s, r.platt[0]);
      CHECK(oracle::platt_grid_dominated(s, f + 1e-8).dominated);
      CHECK(f <= platt_nll(s, {1, 0}) + 1e-12);

      const auto joint = fit_actionwise_platt(as_dims(s));
      const double fj = actionwise_platt_nll(as_dims(s), joint.platt);
      CHECK(oracle::platt_grid_dominated(s, fj + 1e-8).dominated);
    }
  }

  TEST_CASE("property: D=1 joint fit equals global Platt") {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 10; ++rep) {
      auto s = oracle::logistic_samples(rng, 200 + rng() % 2000, 1.0 + rep * 0.5, -0.5);
      s[0].outcome = 0;
      s[1].outcome = 1;
      const auto g = fit_platt(s);
      const auto j = fit_actionwise_platt(as_dims(s));
      REQUIRE(j.platt.size() == 1);
      CHECK(std::abs(j.platt[0].alpha - g.platt[0].alpha) <= 1e-6);
      CHECK(std::abs(j.platt[0].beta - g.platt[0].beta) <= 1e-6);
    }
  }

  TEST_CASE("identical dimensions keep the joint fit symmetric") {
    std::mt19937_64 rng(21);
    const auto s = oracle::logistic_samples(rng, 3000, 3.0, -1.2);
    DimSamples d;
    for (const auto& x : s) {
      d.per_dim_confidence.push_back({x.confidence, x.confidence, x.confidence});
      d.outcomes.push_back(x.outcome);
    }
    const auto r = fit_actionwise_platt(d);
    const auto g = Recalibrator::make_platt(r.platt[0]);
    for (std::size_t i = 0; i < d.size(); i += 97) {
      CHECK(std::abs(apply_actionwise_platt(r, d.per_dim_confidence[i]) - apply_platt(g, s[i].confidence)) <= 1e-6);
    }
  }

  TEST_CASE("independent mode fits each dimension alone") {
    std::mt19937_64 rng(13);
    const auto a = oracle::logistic_samples(rng, 2000, 2.0, -1.0);
    DimSamples d;
    std::vector<ConfidenceSample> second;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& x : a) {
      const double c2 = u(rng);
      d.per_dim_confidence.push_back({x.confidence, c2});
      d.outcomes.push_back(x.outcome);
      second.push_back({c2, x.outcome});
    }
    const auto r = fit_actionwise_platt(d, {}, ActionwiseMode::independent);
    const auto p0 = fit_platt(a).platt[0];
    const auto p1 = fit_platt(second).platt[0];
    CHECK(r.platt[0] == p0);
    CHECK(r.platt[1] == p1);
  }

  TEST_CASE("joint fit never increases training NLL over the (1,0) start") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 5; ++rep) {
      DimSamples d;
      for (int i = 0; i < 800; ++i) {
        const std::vector<double> row{u(rng), u(rng), u(rng), u(rng)};
        d.per_dim_confidence.push_back(row);
        d.outcomes.push_back(u(rng) < oracle::logistic(4.0 * row[rep % 4] - 2.0) ? 1 : 0);
      }
      const auto r = fit_actionwise_platt(d);
      const std::vector<PlattParams> init(4, PlattParams{1, 0});
      CHECK(actionwise_platt_nll(d, r.platt) <= actionwise_platt_nll(d, init) + 1e-12);
    }
  }

  TEST_CASE("temperature one reproduces the baseline confidence") {
    std::mt19937_64 rng(1);
    const auto s = logit_fixture(rng, 200, 3, 6, 1.0);
    const std::vector<double> one{1.0};
    for (const auto& trial : s.logits) {
      TimestepRecord step;
      for (const auto& z : trial) step.dims.push_back({max_softmax(z), std::nullopt, std::nullopt});
      CHECK(temperature_confidence(trial, one) == baseline_confidence(step));
      CHECK(temperature_confidence(trial, std::vector<double>{1e9}) == doctest::Approx(1.0 / 6.0).epsilon(1e-6));
    }
  }

  TEST_CASE("temperature recovery at T*=2") {
    std::mt19937_64 rng(2);
    const auto s = logit_fixture(rng, 50000, 1, 8, 2.0);
    const auto r = fit_temperature(s);
    const double t = r.temperatures[0];
    CHECK(std::abs(t - 2.0) <= 0.1);
    // The fitted T is the minimum of a 1e-3 grid in log T around it.
    const double f = temperature_nll(s, std::vector<double>{t});
    for (int k = -5; k <= 5; ++k) {
      if (k == 0) continue;
      CHECK(f <= temperature_nll(s, std::vector<double>{t * std::exp(1e-3 * k)}) + 1e-12);
    }
  }

  TEST_CASE("action-wise temperature on identical dimensions matches the global fit") {
    std::mt19937_64 rng(3);
    const auto s = logit_fixture(rng, 3000, 3, 5, 1.5, true);
    const double global = fit_temperature(s).temperatures[0];
    const auto aw = fit_actionwise_temperature(s);
    for (double t : aw.temperatures) CHECK(std::abs(t - global) <= 1e-3);
  }

  TEST_CASE("action-wise temperature with D=1 matches the global fit") {
    std::mt19937_64 rng(6);
    const auto s = logit_fixture(rng, 3000, 1, 5, 0.7);
    const double g = fit_temperature(s).temperatures[0];
    const double a = fit_actionwise_temperature(s).temperatures[0];
    CHECK(std::abs(std::log(a) - std::log(g)) <= 2e-6);
  }

  TEST_CASE("property: temperature never changes the argmax") {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> z(0.0, 5.0);
    std::uniform_real_distribution<double> lt(-5.0, 5.0);
    for (int rep = 0; rep < 2000; ++rep) {
      std::vector<double> v(2 + rng() % 40);
      for (double& x : v) x = z(rng);
      const double t = std::exp(lt(rng));
      CHECK(argmax(softmax(v, t)) == argmax(v));
    }
  }

  TEST_CASE("recalibrate_samples plumbing") {
    const auto platt = Recalibrator::make_platt({40.0, -20.0});
    const std::vector<ConfidenceSample> in{{0.1, 0}, {0.9, 1}};
    const auto out = recalibrate_samples(platt, in);
    CHECK(out[0].confidence < 1e-6);
    CHECK(out[1].confidence > 1 - 1e-6);
    CHECK(out[0].outcome == 0);
    CHECK(out[1].outcome == 1);
    CHECK(metric_report(out, 1).brier < 1e-10);

    CHECK(recalibrate_samples(platt, std::vector<ConfidenceSample>{}).empty());
    CHECK(recalibrate_samples(platt, DimSamples{}).empty());
    CHECK(recalibrate_samples(Recalibrator::make_temperature(2.0), LogitSamples{}).empty());

    CHECK(code_of([&] { recalibrate_samples(Recalibrator::make_temperature(2.0), in); }) == ErrorCode::KindMismatch);
    DimSamples two;
    two.per_dim_confidence = {{0.2, 0.4}};
    two.outcomes = {1};
    CHECK(code_of([&] { recalibrate_samples(Recalibrator::make_actionwise_platt({{1, 0}, {1, 0}, {1, 0}}), two); }) ==
          ErrorCode::ShapeMismatch);
    CHECK(code_of([&] { recalibrate_samples(Recalibrator::make_temperature(1.0), two); }) == ErrorCode::KindMismatch);
  }

  TEST_CASE("random split is seeded and disjoint") {
    const Split a = random_split(100, 0.2, 5);
    const Split b = random_split(100, 0.2, 5);
    CHECK(a.calibration == b.calibration);
    CHECK(a.calibration.size() == 20);
    CHECK(a.test.size() == 80);
    std::vector<std::size_t> all = a.calibration;
    all.insert(all.end(), a.test.begin(), a.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < 100; ++i) CHECK(all[i] == i);
    CHECK(random_split(100, 0.2, 6).calibration != a.calibration);
  }
}
