#pragma once

// Synthetic policy generator with known ground truth. Per episode a latent
// difficulty u ~ N(0,1) drives clean per-dimension confidences
//   c_d = lo_d + (hi_d - lo_d) * Phi(rho_d u + sqrt(1 - rho_d^2) e_d),
// the outcome is Bernoulli(link(c)), and the logged per-step confidences are
// c_d plus profile-shaped tracking error, outcome drift and prompt noise.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "calibkit/core.hpp"

namespace calibkit {

struct SuccessLink {
  enum class Kind { identity, platt, per_dim };

  Kind kind = Kind::identity;
  /// platt: p = sigmoid(a * mean_d c_d + b).
  PlattParams platt{1.0, 0.0};
  /// per_dim: p = mean_d sigmoid(a_d c_d + b_d); one entry per dimension.
  std::vector<PlattParams> per_dim;
};

struct DimProfile {
  double lo = 0.2;
  double hi = 0.8;
  /// Loading on the shared latent; in [-1, 1].
  double rho = 0.95;
};

enum class TemporalProfile { flat, sharpening, late_degrading };
enum class LogitEmission { none, first_step, all_steps };

std::string_view to_string(SuccessLink::Kind kind);
std::string_view to_string(TemporalProfile profile);
std::string_view to_string(LogitEmission emission);
TemporalProfile parse_temporal_profile(std::string_view name);
LogitEmission parse_logit_emission(std::string_view name);
SuccessLink::Kind parse_success_link_kind(std::string_view name);

struct SynthConfig {
  std::size_t n_episodes = 1000;
  std::size_t dims = 7;
  std::size_t vocab = 256;
  std::size_t t_min = 5;
  std::size_t t_max = 10;
  SuccessLink link;
  /// One profile per dimension.
  std::vector<DimProfile> dim_profiles = std::vector<DimProfile>(7);

  std::size_t n_variants = 1;
  /// Additive noise on every variant's per-dimension confidence.
  double prompt_noise_sd = 0.0;
  /// Share of the prompt-noise variance common to all dimensions of a
  /// variant, in [0, 1].
  double prompt_noise_shared = 0.0;

  /// Tracking error scale s(pct): flat 1; sharpening 0.1 + 0.9 |pct - 50| / 50;
  /// late_degrading 0.1 + 0.9 pct / 100.
  TemporalProfile temporal_profile = TemporalProfile::flat;
  double tracking_bias = 0.0;
  double tracking_noise_sd = 0.0;
  /// Share of the tracking-noise variance fixed across an episode, in [0, 1].
  double tracking_persistence = 0.0;
  /// Confidence drift toward the outcome: +drift for successes and -drift for
  /// failures at the last step, linear from zero at t = 1.
  double outcome_drift = 0.0;

  /// Steps at or past this completion percent carry proximity = true.
  double proximity_start_pct = 30.0;

  LogitEmission logits = LogitEmission::none;
  /// Emitted logits are this factor times the log-probabilities; 1 keeps the
  /// emitted top_prob equal to the generated confidence.
  double logit_sharpening = 1.0;

  std::uint64_t seed = 0;
};

struct EpisodeTruth {
  std::string episode_id;
  double latent = 0.0;
  std::vector<double> clean_confidence;
  double success_probability = 0.0;
  std::size_t horizon = 0;

  bool operator==(const EpisodeTruth&) const = default;
};

struct GroundTruth {
  std::uint64_t seed = 0;
  std::vector<EpisodeTruth> episodes;

  /// Mean of the true success probabilities.
  double population_success_rate() const;
};

struct SynthOutput {
  std::vector<EpisodeRecord> episodes;
  GroundTruth truth;
};

/// Throws BadConfig on the first invalid field.
void validate(const SynthConfig& config);

/// Deterministic in the config (episode i draws from derive_seed(seed, i)).
SynthOutput generate(const SynthConfig& config);

/// perfect, overconfident, hetero7, discriminative, sharpening.
SynthConfig preset(std::string_view name);
std::vector<std::string> preset_names();

/// Standard normal CDF.
double normal_cdf(double z);

}  // namespace calibkit
