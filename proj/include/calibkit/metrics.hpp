#pragma once

#include <cstddef>
#include <span>

#include "calibkit/core.hpp"

namespace calibkit {

inline constexpr std::size_t kDefaultBins = 12;
inline constexpr double kDefaultNllEpsilon = 1e-12;

struct MetricReport {
  double ece1 = 0.0;
  double ece2 = 0.0;
  double brier = 0.0;
  double nll = 0.0;
  std::size_t n = 0;
  std::size_t m_bins = 0;
};

/// Sorts by confidence (stable on input order) and splits into m bins; bin j
/// takes sorted indices [floor(j*N/m), floor((j+1)*N/m)).
BinnedDiagram equal_mass_bins(std::span<const ConfidenceSample> samples, std::size_t m);

/// Binned ECE_q, (sum_m |B_m|/N * |acc - conf|^q)^(1/q), for q in {1, 2}.
double ece(std::span<const ConfidenceSample> samples, int q, std::size_t m);
double ece(const BinnedDiagram& diagram, int q);

double brier(std::span<const ConfidenceSample> samples);

/// Mean negative log-likelihood with confidences clamped to [eps, 1-eps].
double nll(std::span<const ConfidenceSample> samples, double epsilon = kDefaultNllEpsilon);

MetricReport metric_report(std::span<const ConfidenceSample> samples, std::size_t m = kDefaultBins,
                           double epsilon = kDefaultNllEpsilon);

}  // namespace calibkit
