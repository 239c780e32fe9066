#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "calibkit/core.hpp"
#include "calibkit/metrics.hpp"
#include "calibkit/recalibrate.hpp"

namespace calibkit {

struct DimensionMetrics {
  std::size_t dim_index = 0;
  double ece1 = 0.0;
  double brier = 0.0;
  double nll = 0.0;
  std::size_t n = 0;
};

struct DimensionAudit {
  std::vector<DimensionMetrics> per_dim;

  /// max / min per-dimension ECE_1; infinite when the minimum is zero.
  double ece1_spread() const;
};

/// Metric suite of each dimension's confidence against the shared outcomes.
DimensionAudit dimension_audit(const DimSamples& data, std::size_t m_bins = kDefaultBins);

struct SampleGroup {
  std::string label;
  std::vector<ConfidenceSample> samples;
};

struct GroupRow {
  std::string label;
  std::size_t n = 0;
  double task_error_rate = 0.0;
  double ece1 = 0.0;
  double ece2 = 0.0;
  double brier = 0.0;
  double nll = 0.0;
};

/// Spearman correlation of task error rate with each metric across groups;
/// absent for fewer than three groups or a constant column.
struct RankCorrelations {
  std::optional<double> ece1;
  std::optional<double> ece2;
  std::optional<double> brier;
  std::optional<double> nll;
};

struct CompareTable {
  std::vector<GroupRow> rows;  // input order
  RankCorrelations correlation;
};

CompareTable success_vs_calibration_table(std::span<const SampleGroup> groups, std::size_t m_bins = kDefaultBins);

/// Pearson correlation of mid-ranks (ties share their average rank).
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

}  // namespace calibkit
