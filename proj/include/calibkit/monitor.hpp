#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "calibkit/core.hpp"
#include "calibkit/temporal.hpp"

namespace calibkit {

/// Nearest-rank lower quantile: the value at index ceil(q n) - 1 of the
/// ascending sort. q in (0, 1), values non-empty.
double lower_quantile(std::vector<double> values, double q);

/// Threshold at every completion level: the q-quantile, across episodes, of the
/// aggregated confidence at timestep_at_completion.
ThresholdProfile fit_thresholds(std::span<const EpisodeRecord> episodes, double quantile_level,
                                TemporalAggregation agg);

enum class HaltReason { none, below_threshold_and_proximal };

std::string_view to_string(HaltReason reason);

struct HaltDecision {
  std::string episode_id;
  bool halted = false;
  std::optional<std::size_t> halt_timestep;
  std::optional<int> halt_pct;
  HaltReason reason = HaltReason::none;
};

/// Scans t = 1..T and halts at the first step whose aggregated confidence is
/// strictly below the threshold of its completion level while proximity holds.
/// Step t sits at completion level completion_of_timestep(t, T).
HaltDecision evaluate_halting(const EpisodeRecord& episode, const ThresholdProfile& profile,
                              TemporalAggregation agg);

struct MonitorReport {
  std::vector<HaltDecision> decisions;  // input order
  std::size_t halted_failed = 0;        // true intervention
  std::size_t halted_succeeded = 0;     // false alarm
  std::size_t continued_failed = 0;     // miss
  std::size_t continued_succeeded = 0;
  double halt_rate = 0.0;
  /// Absent when the pool has no episode of that outcome.
  std::optional<double> halt_rate_failures;
  std::optional<double> halt_rate_successes;
};

MonitorReport monitor_report(std::span<const EpisodeRecord> episodes, const ThresholdProfile& profile,
                             TemporalAggregation agg);

/// Like monitor_report with thresholds fitted in-sample, except each episode is
/// judged against thresholds fitted on all other episodes.
MonitorReport monitor_report_leave_one_out(std::span<const EpisodeRecord> episodes, double quantile_level,
                                           TemporalAggregation agg);

}  // namespace calibkit
