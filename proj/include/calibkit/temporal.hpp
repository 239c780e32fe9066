#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "calibkit/core.hpp"

namespace calibkit {

struct TemporalAggregation {
  enum class Kind { current, window, avg_all };

  Kind kind = Kind::current;
  /// Window length, used only by Kind::window; must be >= 1.
  std::size_t window = 5;

  static TemporalAggregation current() { return {Kind::current, 5}; }
  static TemporalAggregation windowed(std::size_t w = 5) { return {Kind::window, w}; }
  static TemporalAggregation avg_all() { return {Kind::avg_all, 5}; }

  bool operator==(const TemporalAggregation&) const = default;
};

std::string_view to_string(TemporalAggregation::Kind kind);
/// Accepts "current", "window", "avg_all"; `window` supplies w for the window kind.
TemporalAggregation parse_temporal_aggregation(std::string_view name, std::size_t window = 5);

/// t = floor(pct * T / 100) + 1 clamped to [1, T], on the canonical variant.
std::size_t timestep_at_completion(const EpisodeRecord& episode, int pct);

/// Completion level of step t in an episode of length T: the smallest level
/// that timestep_at_completion maps to t, i.e. ceil(100 (t - 1) / T); when no
/// level selects t, floor(100 (t - 1) / T) capped at 99.
int completion_of_timestep(std::size_t t, std::size_t horizon);

/// Baseline confidence of every canonical step, in order.
std::vector<double> baseline_series(const EpisodeRecord& episode);

/// Aggregates a baseline series at 1-based step t.
double aggregate_series(std::span<const double> series, std::size_t t, TemporalAggregation agg);

double aggregated_confidence(const EpisodeRecord& episode, std::size_t t, TemporalAggregation agg);

struct CompletionPoint {
  int completion_pct = 0;
  double ece1 = 0.0;
  double brier = 0.0;
  std::size_t n = 0;
  /// Absent when no episode of that outcome exists.
  std::optional<double> mean_conf_success;
  std::optional<double> mean_conf_failure;
};

struct CompletionCurve {
  std::vector<CompletionPoint> points;  // completion_pct 0..99 in order
};

/// One sample per episode at the given completion level.
std::vector<ConfidenceSample> samples_at_completion(std::span<const EpisodeRecord> episodes, int pct,
                                                    TemporalAggregation agg);

CompletionCurve completion_curve(std::span<const EpisodeRecord> episodes, TemporalAggregation agg,
                                 std::size_t m_bins);

BinnedDiagram reliability_at(std::span<const EpisodeRecord> episodes, int pct, TemporalAggregation agg,
                             std::size_t m_bins);

}  // namespace calibkit
