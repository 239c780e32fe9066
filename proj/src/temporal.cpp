#include "calibkit/temporal.hpp"

#include <algorithm>
#include <string>

#include "calibkit/confidence.hpp"
#include "calibkit/metrics.hpp"
#include "calibkit/parallel.hpp"

namespace calibkit {

std::string_view to_string(TemporalAggregation::Kind kind) {
  switch (kind) {
    case TemporalAggregation::Kind::current: return "current";
    case TemporalAggregation::Kind::window: return "window";
    case TemporalAggregation::Kind::avg_all: return "avg_all";
  }
  return "unknown";
}

TemporalAggregation parse_temporal_aggregation(std::string_view name, std::size_t window) {
  if (name == "current") return TemporalAggregation::current();
  if (name == "avg_all") return TemporalAggregation::avg_all();
  if (name == "window") {
    if (window == 0) throw Error(ErrorCode::InvalidArgument, "window length must be >= 1");
    return TemporalAggregation::windowed(window);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown temporal aggregation '" + std::string(name) + "'");
}

namespace {

void check_pct(int pct) {
  if (pct < 0 || pct >= kCompletionLevels) {
    throw Error(ErrorCode::OutOfRange, "completion percent " + std::to_string(pct) + " outside 0..99");
  }
}

void check_curve_input(std::span<const EpisodeRecord> episodes, std::size_t m_bins) {
  if (episodes.size() < m_bins || episodes.empty()) {
    throw Error(ErrorCode::TooFewEpisodes, std::to_string(episodes.size()) + " episodes for " +
                                               std::to_string(m_bins) + " bins");
  }
  shared_dimension(episodes);
}

}  // namespace

std::size_t timestep_at_completion(const EpisodeRecord& episode, int pct) {
  check_pct(pct);
  const std::size_t horizon = episode.canonical().steps.size();
  if (horizon == 0) throw Error(ErrorCode::EmptyEpisode, "episode '" + episode.episode_id + "' has no steps");
  const std::size_t t = static_cast<std::size_t>(pct) * horizon / 100 + 1;
  return std::clamp<std::size_t>(t, 1, horizon);
}

int completion_of_timestep(std::size_t t, std::size_t horizon) {
  if (horizon == 0) throw Error(ErrorCode::EmptyEpisode, "horizon must be positive");
  if (t == 0 || t > horizon) throw Error(ErrorCode::OutOfRange, "timestep outside 1..T");
  // Smallest level whose selected step is t; steps no level selects (T > 100)
  // fall back to the last level before them.
  const std::size_t lowest = (100 * (t - 1) + horizon - 1) / horizon;
  if (lowest <= 99 && lowest * horizon / 100 + 1 == t) return static_cast<int>(lowest);
  return static_cast<int>(std::min<std::size_t>(99, 100 * (t - 1) / horizon));
}

std::vector<double> baseline_series(const EpisodeRecord& episode) {
  std::vector<double> out;
  const auto& steps = episode.canonical().steps;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(baseline_confidence(s));
  return out;
}

double aggregate_series(std::span<const double> series, std::size_t t, TemporalAggregation agg) {
  if (t == 0 || t > series.size()) {
    throw Error(ErrorCode::OutOfRange, "timestep " + std::to_string(t) + " outside 1.." + std::to_string(series.size()));
  }
  std::size_t first = t;  // 1-based, inclusive
  switch (agg.kind) {
    case TemporalAggregation::Kind::current: break;
    case TemporalAggregation::Kind::window:
      if (agg.window == 0) throw Error(ErrorCode::InvalidArgument, "window length must be >= 1");
      first = t > agg.window ? t - agg.window + 1 : 1;
      break;
    case TemporalAggregation::Kind::avg_all: first = 1; break;
  }
  double sum = 0.0;
  for (std::size_t k = first; k <= t; ++k) sum += series[k - 1];
  return sum / static_cast<double>(t - first + 1);
}

double aggregated_confidence(const EpisodeRecord& episode, std::size_t t, TemporalAggregation agg) {
  const auto& steps = episode.canonical().steps;
  if (t == 0 || t > steps.size()) {
    throw Error(ErrorCode::OutOfRange, "timestep " + std::to_string(t) + " outside 1.." + std::to_string(steps.size()));
  }
  return aggregate_series(baseline_series(episode), t, agg);
}

std::vector<ConfidenceSample> samples_at_completion(std::span<const EpisodeRecord> episodes, int pct,
                                                    TemporalAggregation agg) {
  check_pct(pct);
  std::vector<ConfidenceSample> out;
  out.reserve(episodes.size());
  for (const auto& e : episodes) {
    out.push_back({aggregated_confidence(e, timestep_at_completion(e, pct), agg), e.outcome});
  }
  return out;
}

CompletionCurve completion_curve(std::span<const EpisodeRecord> episodes, TemporalAggregation agg,
                                 std::size_t m_bins) {
  check_curve_input(episodes, m_bins);
  std::vector<std::vector<double>> series(episodes.size());
  parallel_for(episodes.size(), [&](std::size_t i) { series[i] = baseline_series(episodes[i]); });

  CompletionCurve curve;
  curve.points.resize(kCompletionLevels);
  parallel_for(kCompletionLevels, [&](std::size_t level) {
    const int pct = static_cast<int>(level);
    std::vector<ConfidenceSample> samples;
    samples.reserve(episodes.size());
    double sum_s = 0.0;
    double sum_f = 0.0;
    std::size_t n_s = 0;
    for (std::size_t i = 0; i < episodes.size(); ++i) {
      const double c = aggregate_series(series[i], timestep_at_completion(episodes[i], pct), agg);
      samples.push_back({c, episodes[i].outcome});
      if (episodes[i].outcome == 1) {
        sum_s += c;
        ++n_s;
      } else {
        sum_f += c;
      }
    }
    const std::size_t n_f = samples.size() - n_s;
    CompletionPoint& p = curve.points[level];
    p.completion_pct = pct;
    p.ece1 = ece(samples, 1, m_bins);
    p.brier = brier(samples);
    p.n = samples.size();
    if (n_s > 0) p.mean_conf_success = sum_s / static_cast<double>(n_s);
    if (n_f > 0) p.mean_conf_failure = sum_f / static_cast<double>(n_f);
  });
  return curve;
}

BinnedDiagram reliability_at(std::span<const EpisodeRecord> episodes, int pct, TemporalAggregation agg,
                             std::size_t m_bins) {
  check_curve_input(episodes, m_bins);
  return equal_mass_bins(samples_at_completion(episodes, pct, agg), m_bins);
}

}  // namespace calibkit
