#pragma once

// Reference implementations used only by tests. Each is written from the
// definition, independently of the library code, and favours obviousness
// over speed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "calibkit/core.hpp"

namespace oracle {

using calibkit::ConfidenceSample;

/// Sorted position of every sample: number of samples with smaller
/// confidence, ties broken by input index.
inline std::vector<std::size_t> positions(const std::vector<ConfidenceSample>& s) {
  std::vector<std::size_t> pos(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t before = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s[j].confidence < s[i].confidence || (s[j].confidence == s[i].confidence && j < i)) ++before;
    }
    pos[i] = before;
  }
  return pos;
}

/// Binned ECE_q straight from the definition: sample at sorted position r
/// belongs to the bin j with floor(jN/m) <= r < floor((j+1)N/m).
inline double ece(const std::vector<ConfidenceSample>& s, int q, std::size_t m) {
  const std::size_t n = s.size();
  const auto pos = positions(s);
  double total = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t lo = j * n / m;
    const std::size_t hi = (j + 1) * n / m;
    double conf = 0.0;
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pos[i] >= lo && pos[i] < hi) {
        conf += s[i].confidence;
        acc += s[i].outcome;
        ++count;
      }
    }
    if (count == 0) continue;
    const double gap = std::abs(acc / static_cast<double>(count) - conf / static_cast<double>(count));
    total += static_cast<double>(count) / static_cast<double>(n) * std::pow(gap, q);
  }
  return q == 1 ? total : std::sqrt(total);
}

inline double brier(const std::vector<ConfidenceSample>& s) {
  double t = 0.0;
  for (const auto& x : s) t += (x.confidence - x.outcome) * (x.confidence - x.outcome);
  return t / static_cast<double>(s.size());
}

inline double nll(const std::vector<ConfidenceSample>& s, double eps = 1e-12) {
  double t = 0.0;
  for (const auto& x : s) {
    const double c = std::min(std::max(x.confidence, eps), 1.0 - eps);
    t -= x.outcome ? std::log(c) : std::log(1.0 - c);
  }
  return t / static_cast<double>(s.size());
}

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct GridCheck {
  bool dominated = true;        // no grid point beats the bound
  double best_seen = std::numeric_limits<double>::infinity();
};

/// Verifies that no point of the 200 x 200 grid over (alpha, beta) in [-5, 5]^2
/// has Platt NLL below `bound`. Per-sample terms are non-negative, so a grid
/// point is abandoned once its partial sum exceeds the bound.
inline GridCheck platt_grid_dominated(const std::vector<ConfidenceSample>& s, double bound, double eps = 1e-12) {
  GridCheck out;
  const double limit = bound * static_cast<double>(s.size());
  for (int ia = 0; ia < 200; ++ia) {
    const double a = -5.0 + 10.0 * ia / 199.0;
    for (int ib = 0; ib < 200; ++ib) {
      const double b = -5.0 + 10.0 * ib / 199.0;
      double sum = 0.0;
      bool abandoned = false;
      for (const auto& x : s) {
        const double g = std::min(std::max(logistic(a * x.confidence + b), eps), 1.0 - eps);
        sum -= x.outcome ? std::log(g) : std::log(1.0 - g);
        if (sum > limit) {
          abandoned = true;
          break;
        }
      }
      if (!abandoned) {
        out.best_seen = std::min(out.best_seen, sum / static_cast<double>(s.size()));
        out.dominated = false;
      }
    }
  }
  return out;
}

/// Exhaustive minimum of the Platt NLL on the 200 x 200 grid.
inline double platt_grid_min(const std::vector<ConfidenceSample>& s, double eps = 1e-12) {
  double best = std::numeric_limits<double>::infinity();
  for (int ia = 0; ia < 200; ++ia) {
    for (int ib = 0; ib < 200; ++ib) {
      const double a = -5.0 + 10.0 * ia / 199.0;
      const double b = -5.0 + 10.0 * ib / 199.0;
      std::vector<ConfidenceSample> g;
      for (const auto& x : s) g.push_back({logistic(a * x.confidence + b), x.outcome});
      best = std::min(best, nll(g, eps));
    }
  }
  return best;
}

/// max_k softmax(z / T)_k computed with long double and no shortcuts.
inline double max_softmax(const std::vector<double>& z, double t) {
  long double denom = 0.0L;
  long double top = -std::numeric_limits<long double>::infinity();
  for (double v : z) top = std::max(top, static_cast<long double>(v));
  for (double v : z) denom += std::exp((static_cast<long double>(v) - top) / t);
  return static_cast<double>(1.0L / denom);
}

/// Nearest-rank lower quantile by counting: the smallest observed v with at
/// least ceil(q n) values <= v.
inline double lower_quantile(const std::vector<double>& v, double q) {
  const auto need = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()) - 1e-9));
  double best = std::numeric_limits<double>::infinity();
  for (double cand : v) {
    std::size_t at_most = 0;
    for (double x : v) at_most += x <= cand;
    if (at_most >= std::max<std::size_t>(need, 1)) best = std::min(best, cand);
  }
  return best;
}

/// Spearman by mid-ranks computed through counting.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0.0;
      double equal = 0.0;
      for (double w : v) {
        less += w < v[i];
        equal += w == v[i];
      }
      r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i] / n;
    my += ry[i] / n;
  }
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// --- hand-rolled generators ----------------------------------------------------

/// N samples with pairwise distinct confidences in (0, 1) and random outcomes.
inline std::vector<ConfidenceSample> distinct_samples(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<ConfidenceSample> s;
  while (s.size() < n) {
    const double c = u(rng);
    if (c <= 0.0) continue;
    bool clash = false;
    for (const auto& x : s) clash |= x.confidence == c;
    if (!clash) s.push_back({c, coin(rng) ? 1 : 0});
  }
  return s;
}

/// Samples whose outcomes follow Bernoulli(sigmoid(a c + b)) with c ~ U(0,1).
inline std::vector<ConfidenceSample> logistic_samples(std::mt19937_64& rng, std::size_t n, double a, double b) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ConfidenceSample> s(n);
  for (auto& x : s) {
    x.confidence = u(rng);
    x.outcome = u(rng) < logistic(a * x.confidence + b) ? 1 : 0;
  }
  return s;
}

/// An episode with variant 0 only, one dimension per step, given baselines.
inline calibkit::EpisodeRecord episode_from(const std::vector<double>& baselines, int outcome,
                                            const std::vector<bool>& proximity = {}) {
  calibkit::EpisodeRecord e;
  e.episode_id = "e";
  e.task_id = "task";
  e.outcome = outcome;
  calibkit::VariantTrajectory v;
  for (std::size_t t = 0; t < baselines.size(); ++t) {
    calibkit::TimestepRecord step;
    step.t = t + 1;
    step.dims.push_back({baselines[t], std::nullopt, std::nullopt});
    step.proximity = proximity.empty() ? false : proximity[t];
    v.steps.push_back(step);
  }
  e.variants.push_back(v);
  return e;
}

}  // namespace oracle
