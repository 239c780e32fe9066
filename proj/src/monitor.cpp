#include "calibkit/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "calibkit/parallel.hpp"

namespace calibkit {

namespace {

void check_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw Error(ErrorCode::BadQuantile, "quantile level must lie in (0,1)");
}

/// ceil(q n) - 1, treating products within rounding noise of an integer as
/// that integer (so 0.7 * 10 selects index 6, not 7).
std::size_t quantile_index(double q, std::size_t n) {
  const double x = q * static_cast<double>(n);
  const double r = std::round(x);
  const double k = std::abs(x - r) <= 1e-9 * std::max(1.0, x) ? r : std::ceil(x);
  return static_cast<std::size_t>(std::max(1.0, k)) - 1;
}

/// values[pct][episode]: aggregated confidence at each completion level.
std::vector<std::vector<double>> level_values(std::span<const EpisodeRecord> episodes,
                                              TemporalAggregation agg) {
  std::vector<std::vector<double>> series(episodes.size());
  parallel_for(episodes.size(), [&](std::size_t i) { series[i] = baseline_series(episodes[i]); });
  std::vector<std::vector<double>> values(kCompletionLevels, std::vector<double>(episodes.size()));
  for (int pct = 0; pct < kCompletionLevels; ++pct) {
    for (std::size_t i = 0; i < episodes.size(); ++i) {
      values[pct][i] = aggregate_series(series[i], timestep_at_completion(episodes[i], pct), agg);
    }
  }
  return values;
}

void check_pool(std::span<const EpisodeRecord> episodes) {
  if (episodes.size() < 2) throw Error(ErrorCode::TooFewEpisodes, "threshold fitting needs >= 2 episodes");
}

MonitorReport summarize(std::span<const EpisodeRecord> episodes, std::vector<HaltDecision> decisions) {
  MonitorReport r;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const bool failed = episodes[i].outcome == 0;
    failures += failed;
    if (decisions[i].halted) {
      ++(failed ? r.halted_failed : r.halted_succeeded);
    } else {
      ++(failed ? r.continued_failed : r.continued_succeeded);
    }
  }
  const std::size_t n = episodes.size();
  const std::size_t successes = n - failures;
  if (n > 0) r.halt_rate = static_cast<double>(r.halted_failed + r.halted_succeeded) / static_cast<double>(n);
  if (failures > 0) r.halt_rate_failures = static_cast<double>(r.halted_failed) / static_cast<double>(failures);
  if (successes > 0) {
    r.halt_rate_successes = static_cast<double>(r.halted_succeeded) / static_cast<double>(successes);
  }
  r.decisions = std::move(decisions);
  return r;
}

}  // namespace

std::string_view to_string(HaltReason reason) {
  return reason == HaltReason::none ? "none" : "below_threshold_and_proximal";
}

double lower_quantile(std::vector<double> values, double q) {
  check_quantile(q);
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "no values for quantile");
  std::sort(values.begin(), values.end());
  return values[quantile_index(q, values.size())];
}

ThresholdProfile fit_thresholds(std::span<const EpisodeRecord> episodes, double quantile_level,
                                TemporalAggregation agg) {
  check_quantile(quantile_level);
  check_pool(episodes);
  const auto values = level_values(episodes, agg);
  ThresholdProfile profile;
  profile.quantile_level = quantile_level;
  for (int pct = 0; pct < kCompletionLevels; ++pct) {
    profile.thresholds[pct] = lower_quantile(values[pct], quantile_level);
  }
  return profile;
}

HaltDecision evaluate_halting(const EpisodeRecord& episode, const ThresholdProfile& profile,
                              TemporalAggregation agg) {
  if (!profile.complete()) {
    throw Error(ErrorCode::MissingProfileLevels, "threshold profile must cover completion levels 0..99");
  }
  HaltDecision d;
  d.episode_id = episode.episode_id;
  const auto& steps = episode.canonical().steps;
  if (steps.empty()) throw Error(ErrorCode::EmptyEpisode, "episode '" + episode.episode_id + "' has no steps");
  const std::vector<double> series = baseline_series(episode);
  for (std::size_t t = 1; t <= steps.size(); ++t) {
    if (!steps[t - 1].proximity) continue;
    const int pct = completion_of_timestep(t, steps.size());
    if (aggregate_series(series, t, agg) < profile.thresholds.at(pct)) {
      d.halted = true;
      d.halt_timestep = t;
      d.halt_pct = pct;
      d.reason = HaltReason::below_threshold_and_proximal;
      break;
    }
  }
  return d;
}

MonitorReport monitor_report(std::span<const EpisodeRecord> episodes, const ThresholdProfile& profile,
                             TemporalAggregation agg) {
  std::vector<HaltDecision> decisions(episodes.size());
  parallel_for(episodes.size(), [&](std::size_t i) { decisions[i] = evaluate_halting(episodes[i], profile, agg); });
  return summarize(episodes, std::move(decisions));
}

MonitorReport monitor_report_leave_one_out(std::span<const EpisodeRecord> episodes, double quantile_level,
                                           TemporalAggregation agg) {
  check_quantile(quantile_level);
  check_pool(episodes);
  const auto values = level_values(episodes, agg);
  std::vector<std::vector<double>> sorted(values);
  for (auto& v : sorted) std::sort(v.begin(), v.end());
  // Dropping one value from a sorted pool of n: the quantile of the other n-1
  // is sorted[k] if the dropped value ranks above k, else sorted[k + 1].
  const std::size_t k = quantile_index(quantile_level, episodes.size() - 1);

  std::vector<HaltDecision> decisions(episodes.size());
  parallel_for(episodes.size(), [&](std::size_t i) {
    ThresholdProfile own;
    own.quantile_level = quantile_level;
    for (int pct = 0; pct < kCompletionLevels; ++pct) {
      const auto& s = sorted[pct];
      const auto rank = static_cast<std::size_t>(std::lower_bound(s.begin(), s.end(), values[pct][i]) - s.begin());
      own.thresholds[pct] = rank > k ? s[k] : s[k + 1];
    }
    decisions[i] = evaluate_halting(episodes[i], own, agg);
  });
  return summarize(episodes, std::move(decisions));
}

}  // namespace calibkit
