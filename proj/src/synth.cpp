#include "calibkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "calibkit/recalibrate.hpp"

namespace calibkit {

std::string_view to_string(SuccessLink::Kind kind) {
  switch (kind) {
    case SuccessLink::Kind::identity: return "identity";
    case SuccessLink::Kind::platt: return "platt";
    case SuccessLink::Kind::per_dim: return "per_dim";
  }
  return "unknown";
}

std::string_view to_string(TemporalProfile profile) {
  switch (profile) {
    case TemporalProfile::flat: return "flat";
    case TemporalProfile::sharpening: return "sharpening";
    case TemporalProfile::late_degrading: return "late_degrading";
  }
  return "unknown";
}

std::string_view to_string(LogitEmission emission) {
  switch (emission) {
    case LogitEmission::none: return "none";
    case LogitEmission::first_step: return "first_step";
    case LogitEmission::all_steps: return "all_steps";
  }
  return "unknown";
}

TemporalProfile parse_temporal_profile(std::string_view name) {
  if (name == "flat") return TemporalProfile::flat;
  if (name == "sharpening") return TemporalProfile::sharpening;
  if (name == "late_degrading") return TemporalProfile::late_degrading;
  throw Error(ErrorCode::BadConfig, "unknown temporal profile '" + std::string(name) + "'");
}

LogitEmission parse_logit_emission(std::string_view name) {
  if (name == "none") return LogitEmission::none;
  if (name == "first_step") return LogitEmission::first_step;
  if (name == "all_steps") return LogitEmission::all_steps;
  throw Error(ErrorCode::BadConfig, "unknown logit emission '" + std::string(name) + "'");
}

SuccessLink::Kind parse_success_link_kind(std::string_view name) {
  if (name == "identity") return SuccessLink::Kind::identity;
  if (name == "platt") return SuccessLink::Kind::platt;
  if (name == "per_dim") return SuccessLink::Kind::per_dim;
  throw Error(ErrorCode::BadConfig, "unknown success link '" + std::string(name) + "'");
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double GroundTruth::population_success_rate() const {
  if (episodes.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : episodes) s += e.success_probability;
  return s / static_cast<double>(episodes.size());
}

namespace {

void bad(const std::string& what) { throw Error(ErrorCode::BadConfig, what); }

bool unit(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

double profile_scale(TemporalProfile profile, double pct) {
  switch (profile) {
    case TemporalProfile::flat: return 1.0;
    case TemporalProfile::sharpening: return 0.1 + 0.9 * std::abs(pct - 50.0) / 50.0;
    case TemporalProfile::late_degrading: return 0.1 + 0.9 * pct / 100.0;
  }
  return 1.0;
}

double success_probability(const SuccessLink& link, const std::vector<double>& clean) {
  double mean = 0.0;
  for (double c : clean) mean += c;
  mean /= static_cast<double>(clean.size());
  switch (link.kind) {
    case SuccessLink::Kind::identity: return mean;
    case SuccessLink::Kind::platt: return sigmoid(link.platt.alpha * mean + link.platt.beta);
    case SuccessLink::Kind::per_dim: {
      double p = 0.0;
      for (std::size_t d = 0; d < clean.size(); ++d) {
        p += sigmoid(link.per_dim[d].alpha * clean[d] + link.per_dim[d].beta);
      }
      return p / static_cast<double>(clean.size());
    }
  }
  return mean;
}

/// A token distribution whose chosen token has probability v and is the
/// strict argmax: the rest of the mass follows a Dirichlet(1) draw, pulled
/// toward uniform just enough to keep every other token below v.
std::vector<double> token_logits(double v, std::size_t vocab, std::size_t chosen, double sharpening,
                                 std::mt19937_64& rng) {
  std::exponential_distribution<double> gamma1(1.0);
  std::vector<double> rest(vocab - 1);
  double total = 0.0;
  for (double& r : rest) {
    r = gamma1(rng);
    total += r;
  }
  const double mass = 1.0 - v;
  const double uniform = mass / static_cast<double>(vocab - 1);
  double top = 0.0;
  for (double& r : rest) {
    r = r / total * mass;
    top = std::max(top, r);
  }
  const double cap = v * (1.0 - 1e-6);
  if (top > cap) {
    const double lambda = (top - cap) / (top - uniform);
    for (double& r : rest) r = (1.0 - lambda) * r + lambda * uniform;
  }
  std::vector<double> logits(vocab);
  std::size_t k = 0;
  for (std::size_t j = 0; j < vocab; ++j) {
    const double p = j == chosen ? v : rest[k++];
    logits[j] = sharpening * std::log(std::max(p, 1e-300));
  }
  return logits;
}

}  // namespace

void validate(const SynthConfig& c) {
  if (c.n_episodes == 0) bad("n_episodes must be >= 1");
  if (c.dims == 0) bad("D must be >= 1");
  if (c.vocab < 2) bad("K must be >= 2");
  if (c.t_min == 0 || c.t_min > c.t_max) bad("T range must satisfy 1 <= t_min <= t_max");
  if (c.dim_profiles.size() != c.dims) bad("need one dimension profile per dimension");
  for (const auto& p : c.dim_profiles) {
    if (!unit(p.lo) || !unit(p.hi) || p.lo > p.hi) bad("dimension profile needs 0 <= lo <= hi <= 1");
    if (!std::isfinite(p.rho) || std::abs(p.rho) > 1.0) bad("dimension rho must lie in [-1, 1]");
  }
  if (c.link.kind == SuccessLink::Kind::per_dim && c.link.per_dim.size() != c.dims) {
    bad("per_dim link needs one (a, b) per dimension");
  }
  for (const auto& p : c.link.per_dim) {
    if (!std::isfinite(p.alpha) || !std::isfinite(p.beta)) bad("link parameters must be finite");
  }
  if (!std::isfinite(c.link.platt.alpha) || !std::isfinite(c.link.platt.beta)) bad("link parameters must be finite");
  if (c.n_variants == 0) bad("n_variants must be >= 1");
  if (!std::isfinite(c.prompt_noise_sd) || c.prompt_noise_sd < 0.0) bad("prompt_noise_sd must be >= 0");
  if (!unit(c.prompt_noise_shared)) bad("prompt_noise_shared must lie in [0, 1]");
  if (!std::isfinite(c.tracking_bias)) bad("tracking_bias must be finite");
  if (!std::isfinite(c.tracking_noise_sd) || c.tracking_noise_sd < 0.0) bad("tracking_noise_sd must be >= 0");
  if (!unit(c.tracking_persistence)) bad("tracking_persistence must lie in [0, 1]");
  if (!std::isfinite(c.outcome_drift)) bad("outcome_drift must be finite");
  if (!std::isfinite(c.proximity_start_pct)) bad("proximity_start_pct must be finite");
  if (!std::isfinite(c.logit_sharpening) || c.logit_sharpening <= 0.0) bad("logit_sharpening must be > 0");
}

SynthOutput generate(const SynthConfig& c) {
  validate(c);
  SynthOutput out;
  out.truth.seed = c.seed;
  out.episodes.reserve(c.n_episodes);
  out.truth.episodes.reserve(c.n_episodes);

  const double floor_prob = 1.0 / static_cast<double>(c.vocab) + 1e-4;
  const double ceil_prob = 1.0 - 1e-6;
  const double w_shared = std::sqrt(c.prompt_noise_shared);
  const double w_own = std::sqrt(1.0 - c.prompt_noise_shared);
  const double w_persist = std::sqrt(c.tracking_persistence);
  const double w_fresh = std::sqrt(1.0 - c.tracking_persistence);
  const std::size_t width = std::max<std::size_t>(6, std::to_string(c.n_episodes).size());

  for (std::size_t i = 0; i < c.n_episodes; ++i) {
    std::mt19937_64 rng(derive_seed(c.seed, i));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform01(0.0, 1.0);

    EpisodeTruth truth;
    std::string digits = std::to_string(i);
    truth.episode_id = "ep" + std::string(width - digits.size(), '0') + digits;
    truth.latent = normal(rng);
    truth.clean_confidence.resize(c.dims);
    for (std::size_t d = 0; d < c.dims; ++d) {
      const auto& p = c.dim_profiles[d];
      const double z = p.rho * truth.latent + std::sqrt(1.0 - p.rho * p.rho) * normal(rng);
      truth.clean_confidence[d] = p.lo + (p.hi - p.lo) * normal_cdf(z);
    }
    truth.success_probability = success_probability(c.link, truth.clean_confidence);
    const int outcome = uniform01(rng) < truth.success_probability ? 1 : 0;
    truth.horizon = std::uniform_int_distribution<std::size_t>(c.t_min, c.t_max)(rng);
    const std::size_t horizon = truth.horizon;

    std::vector<double> persistent(c.dims);
    for (double& e : persistent) e = normal(rng);

    // Canonical per-step confidences before prompt noise.
    std::vector<std::vector<double>> clean_steps(horizon, std::vector<double>(c.dims));
    const double sign = outcome == 1 ? 1.0 : -1.0;
    for (std::size_t t = 1; t <= horizon; ++t) {
      const double pct = 100.0 * static_cast<double>(t - 1) / static_cast<double>(horizon);
      const double s = profile_scale(c.temporal_profile, pct);
      const double progress = static_cast<double>(t - 1) / static_cast<double>(std::max<std::size_t>(horizon - 1, 1));
      for (std::size_t d = 0; d < c.dims; ++d) {
        const double noise = c.tracking_noise_sd * (w_persist * persistent[d] + w_fresh * normal(rng));
        clean_steps[t - 1][d] =
            truth.clean_confidence[d] + s * (c.tracking_bias + noise) + c.outcome_drift * sign * progress;
      }
    }

    EpisodeRecord episode;
    episode.episode_id = truth.episode_id;
    episode.task_id = "synth";
    episode.outcome = outcome;
    episode.variants.resize(c.n_variants);
    for (std::size_t v = 0; v < c.n_variants; ++v) {
      VariantTrajectory& traj = episode.variants[v];
      traj.variant_id = static_cast<int>(v);
      traj.instruction_text = v == 0 ? "original instruction" : "paraphrase " + std::to_string(v);
      traj.steps.resize(horizon);
      for (std::size_t t = 1; t <= horizon; ++t) {
        TimestepRecord& step = traj.steps[t - 1];
        step.t = t;
        const double pct = 100.0 * static_cast<double>(t - 1) / static_cast<double>(horizon);
        step.proximity = pct >= c.proximity_start_pct;
        const bool emit = c.logits == LogitEmission::all_steps || (c.logits == LogitEmission::first_step && t == 1);
        const double shared = c.prompt_noise_sd > 0.0 ? normal(rng) : 0.0;
        step.dims.resize(c.dims);
        for (std::size_t d = 0; d < c.dims; ++d) {
          double x = clean_steps[t - 1][d];
          if (c.prompt_noise_sd > 0.0) x += c.prompt_noise_sd * (w_shared * shared + w_own * normal(rng));
          x = std::clamp(x, floor_prob, ceil_prob);
          DimensionStep& ds = step.dims[d];
          if (emit) {
            const auto chosen = std::uniform_int_distribution<std::size_t>(0, c.vocab - 1)(rng);
            std::vector<double> z = token_logits(x, c.vocab, chosen, c.logit_sharpening, rng);
            ds.top_prob = softmax_at(z, chosen);
            ds.chosen_token = static_cast<int>(chosen);
            ds.logits = std::move(z);
          } else {
            ds.top_prob = x;
          }
        }
      }
    }
    out.episodes.push_back(std::move(episode));
    out.truth.episodes.push_back(std::move(truth));
  }
  return out;
}

std::vector<std::string> preset_names() {
  return {"perfect", "overconfident", "hetero7", "discriminative", "sharpening"};
}

SynthConfig preset(std::string_view name) {
  SynthConfig c;
  c.dims = 7;
  c.vocab = 256;
  c.t_min = 5;
  c.t_max = 10;
  c.dim_profiles.assign(7, DimProfile{0.2, 0.8, 0.95});
  if (name == "perfect") return c;
  if (name == "overconfident") {
    c.link.kind = SuccessLink::Kind::platt;
    c.link.platt = {5.0, -3.5};
    return c;
  }
  if (name == "hetero7") {
    // Five steep informative dimensions with differing ranges, one
    // uninformative mid-range dimension, one saturated dimension.
    const double lo[] = {0.2, 0.25, 0.15, 0.3, 0.2, 0.45, 0.93};
    const double hi[] = {0.9, 0.85, 0.95, 0.8, 0.9, 0.55, 0.99};
    const double rho[] = {0.97, 0.97, 0.97, 0.97, 0.97, 0.0, 0.0};
    const double a[] = {40, 40, 40, 40, 40, 0, 0};
    const double b[] = {-22, -22, -22, -22, -22, -8, 8};
    c.vocab = 32;
    c.link.kind = SuccessLink::Kind::per_dim;
    c.link.per_dim.clear();
    for (std::size_t d = 0; d < 7; ++d) {
      c.dim_profiles[d] = {lo[d], hi[d], rho[d]};
      c.link.per_dim.push_back({a[d], b[d]});
    }
    c.logits = LogitEmission::first_step;
    return c;
  }
  if (name == "discriminative") {
    c.t_min = 20;
    c.t_max = 40;
    c.tracking_noise_sd = 0.05;
    c.outcome_drift = 0.15;
    return c;
  }
  if (name == "sharpening") {
    c.t_min = 20;
    c.t_max = 40;
    c.temporal_profile = TemporalProfile::sharpening;
    c.tracking_bias = 0.15;
    c.tracking_noise_sd = 0.1;
    c.tracking_persistence = 0.5;
    return c;
  }
  throw Error(ErrorCode::UnknownPreset, "unknown preset '" + std::string(name) + "'");
}

}  // namespace calibkit
