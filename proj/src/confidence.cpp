#include "calibkit/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace calibkit {

std::string_view to_string(TrialAggregation agg) {
  switch (agg) {
    case TrialAggregation::pre_action: return "pre_action";
    case TrialAggregation::mean: return "mean";
    case TrialAggregation::min: return "min";
    case TrialAggregation::max: return "max";
  }
  return "unknown";
}

TrialAggregation parse_trial_aggregation(std::string_view name) {
  if (name == "pre_action") return TrialAggregation::pre_action;
  if (name == "mean") return TrialAggregation::mean;
  if (name == "min") return TrialAggregation::min;
  if (name == "max") return TrialAggregation::max;
  throw Error(ErrorCode::InvalidArgument, "unknown aggregation '" + std::string(name) + "'");
}

double baseline_confidence(const TimestepRecord& step) {
  if (step.dims.empty()) throw Error(ErrorCode::EmptyDims, "timestep has no dimensions");
  double sum = 0.0;
  for (const auto& d : step.dims) sum += d.top_prob;
  return sum / static_cast<double>(step.dims.size());
}

double ensemble_confidence(std::span<const double> variant_confidences) {
  if (variant_confidences.empty()) throw Error(ErrorCode::EmptyEnsemble, "no variant confidences");
  double sum = 0.0;
  for (double c : variant_confidences) {
    if (!std::isfinite(c) || c < 0.0 || c > 1.0) {
      throw Error(ErrorCode::OutOfRange, "variant confidence outside [0,1]");
    }
    sum += c;
  }
  return sum / static_cast<double>(variant_confidences.size());
}

std::vector<double> variant_baselines_at(const EpisodeRecord& episode, std::size_t t) {
  std::vector<double> out;
  out.reserve(episode.variants.size());
  for (const auto& v : episode.variants) {
    if (t == 0 || t > v.steps.size()) {
      throw Error(ErrorCode::MissingTimestep, "variant " + std::to_string(v.variant_id) +
                                                  " has no timestep " + std::to_string(t));
    }
    out.push_back(baseline_confidence(v.steps[t - 1]));
  }
  return out;
}

namespace {

std::vector<const VariantTrajectory*> select_variants(const EpisodeRecord& episode, bool use_ensemble,
                                                      std::optional<std::size_t> ensemble_size) {
  if (!use_ensemble) return {&episode.canonical()};
  const std::size_t available = episode.variants.size();
  const std::size_t k = ensemble_size.value_or(available);
  if (k == 0) throw Error(ErrorCode::EmptyEnsemble, "ensemble size must be positive");
  if (k > available) {
    throw Error(ErrorCode::NotEnoughVariants, "requested " + std::to_string(k) + " variants, episode '" +
                                                  episode.episode_id + "' has " + std::to_string(available));
  }
  std::vector<const VariantTrajectory*> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(&episode.variants[i]);
  return out;
}

double ensemble_at(std::span<const VariantTrajectory* const> variants, std::size_t t) {
  std::vector<double> values;
  values.reserve(variants.size());
  for (const auto* v : variants) values.push_back(baseline_confidence(v->steps[t - 1]));
  return ensemble_confidence(values);
}

}  // namespace

ConfidenceSample trial_confidence(const EpisodeRecord& episode, TrialAggregation agg, bool use_ensemble,
                                  std::optional<std::size_t> ensemble_size) {
  const auto variants = select_variants(episode, use_ensemble, ensemble_size);
  std::size_t common = variants.front()->steps.size();
  for (const auto* v : variants) common = std::min(common, v->steps.size());
  if (common == 0) throw Error(ErrorCode::MissingTimestep, "episode '" + episode.episode_id + "' has no t=1");

  ConfidenceSample out;
  out.outcome = episode.outcome;
  if (agg == TrialAggregation::pre_action) {
    out.confidence = ensemble_at(variants, 1);
    return out;
  }
  double acc = agg == TrialAggregation::mean ? 0.0 : ensemble_at(variants, 1);
  for (std::size_t t = 1; t <= common; ++t) {
    const double c = ensemble_at(variants, t);
    switch (agg) {
      case TrialAggregation::mean: acc += c; break;
      case TrialAggregation::min: acc = std::min(acc, c); break;
      case TrialAggregation::max: acc = std::max(acc, c); break;
      case TrialAggregation::pre_action: break;
    }
  }
  out.confidence = agg == TrialAggregation::mean ? acc / static_cast<double>(common) : acc;
  return out;
}

std::vector<ConfidenceSample> subsample_ensembles(const EpisodeRecord& episode, std::size_t k,
                                                  std::size_t trials, std::uint64_t seed) {
  const std::size_t available = episode.variants.size();
  if (k == 0 || k > available) {
    throw Error(ErrorCode::KTooLarge, "k=" + std::to_string(k) + " with " + std::to_string(available) +
                                          " variants available");
  }
  if (trials == 0) throw Error(ErrorCode::InvalidArgument, "trials must be >= 1");

  const std::vector<double> baselines = variant_baselines_at(episode, 1);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(available);
  std::vector<double> chosen(k);
  std::vector<ConfidenceSample> out;
  out.reserve(trials);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates: the first k slots become a uniform k-subset.
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, available - 1);
      std::swap(idx[i], idx[pick(rng)]);
      chosen[i] = baselines[idx[i]];
    }
    out.push_back({ensemble_confidence(chosen), episode.outcome});
  }
  return out;
}

}  // namespace calibkit
