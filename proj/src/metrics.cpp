#include "calibkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace calibkit {
namespace {

void check_samples(std::span<const ConfidenceSample> samples) {
  if (samples.empty()) throw Error(ErrorCode::EmptyInput, "no samples");
  for (const auto& s : samples) validate(s);
}

}  // namespace

BinnedDiagram equal_mass_bins(std::span<const ConfidenceSample> samples, std::size_t m) {
  check_samples(samples);
  const std::size_t n = samples.size();
  if (m == 0) throw Error(ErrorCode::InvalidArgument, "bin count must be positive");
  if (m > n) {
    throw Error(ErrorCode::TooManyBins,
                std::to_string(m) + " bins requested for " + std::to_string(n) + " samples");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].confidence < samples[b].confidence;
  });

  BinnedDiagram out;
  out.total_n = n;
  out.bins.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t lo = j * n / m;
    const std::size_t hi = (j + 1) * n / m;
    double conf = 0.0;
    double hits = 0.0;
    for (std::size_t r = lo; r < hi; ++r) {
      conf += samples[order[r]].confidence;
      hits += samples[order[r]].outcome;
    }
    const auto count = static_cast<double>(hi - lo);
    out.bins.push_back({hi - lo, conf / count, hits / count});
  }
  return out;
}

double ece(const BinnedDiagram& diagram, int q) {
  if (q != 1 && q != 2) throw Error(ErrorCode::InvalidQ, "q must be 1 or 2");
  const auto n = static_cast<double>(diagram.total_n);
  double acc = 0.0;
  for (const auto& b : diagram.bins) {
    const double gap = std::abs(b.mean_accuracy - b.mean_confidence);
    acc += static_cast<double>(b.count) / n * (q == 1 ? gap : gap * gap);
  }
  return q == 1 ? acc : std::sqrt(acc);
}

double ece(std::span<const ConfidenceSample> samples, int q, std::size_t m) {
  if (q != 1 && q != 2) throw Error(ErrorCode::InvalidQ, "q must be 1 or 2");
  return ece(equal_mass_bins(samples, m), q);
}

double brier(std::span<const ConfidenceSample> samples) {
  check_samples(samples);
  double acc = 0.0;
  for (const auto& s : samples) {
    const double d = s.confidence - s.outcome;
    acc += d * d;
  }
  return acc / static_cast<double>(samples.size());
}

double nll(std::span<const ConfidenceSample> samples, double epsilon) {
  check_samples(samples);
  if (!(epsilon > 0.0 && epsilon < 0.5)) {
    throw Error(ErrorCode::InvalidArgument, "epsilon must lie in (0, 0.5)");
  }
  double acc = 0.0;
  for (const auto& s : samples) {
    // Clamping the probability of the realised outcome, rather than c itself,
    // keeps log(epsilon) exact at c = 1 for failures (1 - 1e-12 is inexact).
    const double p = s.outcome == 1 ? s.confidence : 1.0 - s.confidence;
    acc += std::log(std::clamp(p, epsilon, 1.0 - epsilon));
  }
  return -acc / static_cast<double>(samples.size());
}

MetricReport metric_report(std::span<const ConfidenceSample> samples, std::size_t m, double epsilon) {
  const BinnedDiagram diagram = equal_mass_bins(samples, m);
  MetricReport r;
  r.ece1 = ece(diagram, 1);
  r.ece2 = ece(diagram, 2);
  r.brier = brier(samples);
  r.nll = nll(samples, epsilon);
  r.n = samples.size();
  r.m_bins = m;
  return r;
}

}  // namespace calibkit
