#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "calibkit/core.hpp"

namespace calibkit {

/// How per-timestep confidences collapse into one trial-level value.
enum class TrialAggregation { pre_action, mean, min, max };

std::string_view to_string(TrialAggregation agg);
TrialAggregation parse_trial_aggregation(std::string_view name);

/// Mean over dimensions of the selected-token probability.
double baseline_confidence(const TimestepRecord& step);

/// Arithmetic mean of per-variant confidences.
double ensemble_confidence(std::span<const double> variant_confidences);

/// Trial-level confidence. Ensembling happens per timestep, before temporal
/// aggregation. Without `use_ensemble` only variant 0 is used; with it, the
/// first `ensemble_size` variants in stored order (default: all). For
/// mean/min/max only timesteps present in every selected variant count.
ConfidenceSample trial_confidence(const EpisodeRecord& episode, TrialAggregation agg,
                                  bool use_ensemble = false,
                                  std::optional<std::size_t> ensemble_size = std::nullopt);

/// Draws k of the episode's variants without replacement, `trials` times, and
/// returns the pre-action ensemble confidence of each draw.
std::vector<ConfidenceSample> subsample_ensembles(const EpisodeRecord& episode, std::size_t k,
                                                  std::size_t trials, std::uint64_t seed);

/// Baseline confidence at timestep t (1-based) for every variant, in stored order.
std::vector<double> variant_baselines_at(const EpisodeRecord& episode, std::size_t t);

}  // namespace calibkit
