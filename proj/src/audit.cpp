#include "calibkit/audit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "calibkit/parallel.hpp"

namespace calibkit {

double DimensionAudit::ece1_spread() const {
  if (per_dim.empty()) return 0.0;
  double lo = per_dim.front().ece1;
  double hi = lo;
  for (const auto& d : per_dim) {
    lo = std::min(lo, d.ece1);
    hi = std::max(hi, d.ece1);
  }
  if (lo == 0.0) return hi == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return hi / lo;
}

DimensionAudit dimension_audit(const DimSamples& data, std::size_t m_bins) {
  if (data.size() == 0) throw Error(ErrorCode::EmptyInput, "no samples");
  if (data.per_dim_confidence.size() != data.outcomes.size()) {
    throw Error(ErrorCode::ShapeMismatch, "confidence rows and outcomes differ in length");
  }
  const std::size_t dims = data.dimension();
  if (dims == 0) throw Error(ErrorCode::EmptyDims, "no dimensions");
  for (const auto& row : data.per_dim_confidence) {
    if (row.size() != dims) throw Error(ErrorCode::ShapeMismatch, "per-dimension rows are ragged");
  }
  DimensionAudit audit;
  audit.per_dim.resize(dims);
  parallel_for(dims, [&](std::size_t d) {
    std::vector<ConfidenceSample> column(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) column[i] = {data.per_dim_confidence[i][d], data.outcomes[i]};
    const MetricReport r = metric_report(column, m_bins);
    audit.per_dim[d] = {d, r.ece1, r.brier, r.nll, r.n};
  });
  return audit;
}

namespace {

std::vector<double> mid_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "series differ in length");
  if (x.size() < 3) return std::nullopt;
  const auto rx = mid_ranks(x);
  const auto ry = mid_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

CompareTable success_vs_calibration_table(std::span<const SampleGroup> groups, std::size_t m_bins) {
  CompareTable table;
  table.rows.resize(groups.size());
  for (const auto& g : groups) {
    if (g.samples.empty()) throw Error(ErrorCode::EmptyGroup, "group '" + g.label + "' has no samples");
  }
  parallel_for(groups.size(), [&](std::size_t i) {
    const auto& g = groups[i];
    const MetricReport r = metric_report(g.samples, m_bins);
    double hits = 0.0;
    for (const auto& s : g.samples) hits += s.outcome;
    table.rows[i] = {g.label, r.n, 1.0 - hits / static_cast<double>(r.n), r.ece1, r.ece2, r.brier, r.nll};
  });
  std::vector<double> err, e1, e2, br, nl;
  for (const auto& row : table.rows) {
    err.push_back(row.task_error_rate);
    e1.push_back(row.ece1);
    e2.push_back(row.ece2);
    br.push_back(row.brier);
    nl.push_back(row.nll);
  }
  table.correlation = {spearman(err, e1), spearman(err, e2), spearman(err, br), spearman(err, nl)};
  return table;
}

}  // namespace calibkit
