#include "calibkit/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace calibkit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::TooManyBins: return "TooManyBins";
    case ErrorCode::InvalidQ: return "InvalidQ";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::EmptyDims: return "EmptyDims";
    case ErrorCode::EmptyEnsemble: return "EmptyEnsemble";
    case ErrorCode::MissingTimestep: return "MissingTimestep";
    case ErrorCode::NotEnoughVariants: return "NotEnoughVariants";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::MixedDimensions: return "MixedDimensions";
    case ErrorCode::Degenerate: return "Degenerate";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MissingLogits: return "MissingLogits";
    case ErrorCode::EmptyEpisode: return "EmptyEpisode";
    case ErrorCode::TooFewEpisodes: return "TooFewEpisodes";
    case ErrorCode::BadQuantile: return "BadQuantile";
    case ErrorCode::MissingProfileLevels: return "MissingProfileLevels";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::UnknownPreset: return "UnknownPreset";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaVersionUnsupported: return "SchemaVersionUnsupported";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::Degenerate:
    case ErrorCode::NonFinite:
    case ErrorCode::Io:
      return false;
    default:
      return true;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

ParseError::ParseError(std::size_t line, std::string path, const std::string& cause)
    : Error(ErrorCode::ParseError,
            "line " + std::to_string(line) + ", field " + path + ": " + cause),
      line_(line),
      path_(std::move(path)),
      cause_(cause) {}

const VariantTrajectory& EpisodeRecord::canonical() const {
  for (const auto& v : variants) {
    if (v.variant_id == 0) return v;
  }
  throw Error(ErrorCode::NotEnoughVariants, "episode '" + episode_id + "' has no variant 0");
}

std::size_t EpisodeRecord::dimension() const {
  const auto& steps = canonical().steps;
  if (steps.empty()) throw Error(ErrorCode::EmptyEpisode, "episode '" + episode_id + "' has no steps");
  return steps.front().dims.size();
}

Recalibrator Recalibrator::make_platt(PlattParams p) {
  Recalibrator r;
  r.kind = RecalibratorKind::platt;
  r.platt = {p};
  return r;
}

Recalibrator Recalibrator::make_temperature(double t) {
  Recalibrator r;
  r.kind = RecalibratorKind::temperature;
  r.temperatures = {t};
  validate(r);
  return r;
}

Recalibrator Recalibrator::make_actionwise_platt(std::vector<PlattParams> params) {
  Recalibrator r;
  r.kind = RecalibratorKind::actionwise_platt;
  r.platt = std::move(params);
  validate(r);
  return r;
}

Recalibrator Recalibrator::make_actionwise_temperature(std::vector<double> temps) {
  Recalibrator r;
  r.kind = RecalibratorKind::actionwise_temperature;
  r.temperatures = std::move(temps);
  validate(r);
  return r;
}

std::size_t Recalibrator::dimension() const {
  switch (kind) {
    case RecalibratorKind::platt:
    case RecalibratorKind::temperature:
      return 1;
    case RecalibratorKind::actionwise_platt:
      return platt.size();
    case RecalibratorKind::actionwise_temperature:
      return temperatures.size();
  }
  return 0;
}

std::string_view to_string(RecalibratorKind kind) {
  switch (kind) {
    case RecalibratorKind::platt: return "platt";
    case RecalibratorKind::temperature: return "temperature";
    case RecalibratorKind::actionwise_platt: return "actionwise_platt";
    case RecalibratorKind::actionwise_temperature: return "actionwise_temperature";
  }
  return "unknown";
}

RecalibratorKind parse_recalibrator_kind(std::string_view name) {
  if (name == "platt") return RecalibratorKind::platt;
  if (name == "temperature") return RecalibratorKind::temperature;
  if (name == "actionwise_platt") return RecalibratorKind::actionwise_platt;
  if (name == "actionwise_temperature") return RecalibratorKind::actionwise_temperature;
  throw Error(ErrorCode::KindMismatch, "unknown recalibrator kind '" + std::string(name) + "'");
}

bool ThresholdProfile::complete() const {
  for (int pct = 0; pct < kCompletionLevels; ++pct) {
    if (!thresholds.contains(pct)) return false;
  }
  return true;
}

namespace {

bool in_unit_interval(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

}  // namespace

void validate(const DimensionStep& step) {
  if (!in_unit_interval(step.top_prob)) {
    throw Error(ErrorCode::OutOfRange, "top_prob must lie in [0,1]");
  }
  if (step.chosen_token && !step.logits) {
    // A chosen token without logits is informational only; nothing to check.
    if (*step.chosen_token < 0) throw Error(ErrorCode::OutOfRange, "chosen_token must be >= 0");
    return;
  }
  if (!step.logits) return;
  const auto& z = *step.logits;
  if (z.size() < 2) throw Error(ErrorCode::ShapeMismatch, "logits need at least 2 entries");
  for (double v : z) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "logits must be finite");
  }
  const std::size_t best = argmax(z);
  std::size_t chosen = best;
  if (step.chosen_token) {
    if (*step.chosen_token < 0 || static_cast<std::size_t>(*step.chosen_token) >= z.size()) {
      throw Error(ErrorCode::OutOfRange, "chosen_token outside [0, K)");
    }
    chosen = static_cast<std::size_t>(*step.chosen_token);
    if (z[chosen] != z[best]) {
      throw Error(ErrorCode::InvalidArgument, "chosen_token is not an argmax of logits");
    }
  }
  if (std::abs(softmax_at(z, chosen) - step.top_prob) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "top_prob disagrees with softmax(logits)");
  }
}

void validate(const EpisodeRecord& episode) {
  if (episode.outcome != 0 && episode.outcome != 1) {
    throw Error(ErrorCode::OutOfRange, "outcome must be 0 or 1");
  }
  if (episode.variants.empty()) {
    throw Error(ErrorCode::NotEnoughVariants, "episode has no variants");
  }
  const auto& canon = episode.canonical();
  if (canon.steps.empty()) throw Error(ErrorCode::EmptyEpisode, "variant 0 has no steps");
  const std::size_t d = canon.steps.front().dims.size();
  if (d == 0) throw Error(ErrorCode::EmptyDims, "timestep has no dimensions");
  for (const auto& v : episode.variants) {
    if (v.variant_id < 0) throw Error(ErrorCode::OutOfRange, "variant_id must be >= 0");
    for (std::size_t i = 0; i < v.steps.size(); ++i) {
      const auto& s = v.steps[i];
      if (s.t != i + 1) throw Error(ErrorCode::MissingTimestep, "steps must be contiguous from t=1");
      if (s.dims.size() != d) throw Error(ErrorCode::MixedDimensions, "ragged dimension count");
      for (const auto& dim : s.dims) validate(dim);
    }
  }
}

void validate(const ConfidenceSample& sample) {
  if (!in_unit_interval(sample.confidence)) {
    throw Error(ErrorCode::OutOfRange, "confidence must lie in [0,1]");
  }
  if (sample.outcome != 0 && sample.outcome != 1) {
    throw Error(ErrorCode::OutOfRange, "outcome must be 0 or 1");
  }
}

void validate(const Recalibrator& r) {
  switch (r.kind) {
    case RecalibratorKind::platt:
      if (r.platt.size() != 1) throw Error(ErrorCode::ShapeMismatch, "platt needs one (alpha, beta)");
      break;
    case RecalibratorKind::actionwise_platt:
      if (r.platt.empty()) throw Error(ErrorCode::ShapeMismatch, "actionwise platt needs D >= 1");
      break;
    case RecalibratorKind::temperature:
      if (r.temperatures.size() != 1) throw Error(ErrorCode::ShapeMismatch, "temperature needs one T");
      break;
    case RecalibratorKind::actionwise_temperature:
      if (r.temperatures.empty()) throw Error(ErrorCode::ShapeMismatch, "actionwise temperature needs D >= 1");
      break;
  }
  for (const auto& p : r.platt) {
    if (!std::isfinite(p.alpha) || !std::isfinite(p.beta)) {
      throw Error(ErrorCode::NonFinite, "platt parameters must be finite");
    }
  }
  for (double t : r.temperatures) {
    if (!std::isfinite(t) || t <= 0.0) throw Error(ErrorCode::OutOfRange, "temperatures must be > 0");
  }
}

std::size_t shared_dimension(std::span<const EpisodeRecord> episodes) {
  if (episodes.empty()) throw Error(ErrorCode::EmptyInput, "no episodes");
  const std::size_t d = episodes.front().dimension();
  for (const auto& e : episodes) {
    for (const auto& v : e.variants) {
      for (const auto& s : v.steps) {
        if (s.dims.size() != d) {
          throw Error(ErrorCode::MixedDimensions,
                      "episode '" + e.episode_id + "' has D=" + std::to_string(s.dims.size()) +
                          ", expected " + std::to_string(d));
        }
      }
    }
  }
  return d;
}

double softmax_at(std::span<const double> logits, std::size_t index, double temperature) {
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double z : logits) denom += std::exp((z - zmax) / temperature);
  return std::exp((logits[index] - zmax) / temperature) / denom;
}

double max_softmax(std::span<const double> logits, double temperature) {
  // exp(0) = 1 for the maximal entry.
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double z : logits) denom += std::exp((z - zmax) / temperature);
  return 1.0 / denom;
}

std::vector<double> softmax(std::span<const double> logits, double temperature) {
  const double zmax = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double denom = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp((logits[k] - zmax) / temperature);
    denom += out[k];
  }
  for (double& p : out) p /= denom;
  return out;
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace calibkit
