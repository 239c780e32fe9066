#pragma once

// Shared domain types. Everything here is a plain value type; once built and
// validated, instances are never mutated by the library and may be shared
// freely across threads.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "calibkit/error.hpp"

namespace calibkit {

/// One action dimension at one timestep: the probability of the selected
/// token, and optionally the full logit vector it came from.
struct DimensionStep {
  double top_prob = 0.0;
  std::optional<std::vector<double>> logits;
  std::optional<int> chosen_token;

  bool operator==(const DimensionStep&) const = default;
};

struct TimestepRecord {
  std::size_t t = 1;
  std::vector<DimensionStep> dims;
  bool proximity = false;

  bool operator==(const TimestepRecord&) const = default;
};

/// The rollout (or rescoring) of one instruction wording. Variant 0 is the
/// original instruction.
struct VariantTrajectory {
  int variant_id = 0;
  std::string instruction_text;
  std::vector<TimestepRecord> steps;

  bool operator==(const VariantTrajectory&) const = default;
};

struct EpisodeRecord {
  std::string episode_id;
  std::string task_id;
  int outcome = 0;
  std::vector<VariantTrajectory> variants;

  /// The variant with id 0; it defines the horizon T and carries the outcome.
  const VariantTrajectory& canonical() const;
  std::size_t horizon() const { return canonical().steps.size(); }
  std::size_t dimension() const;

  bool operator==(const EpisodeRecord&) const = default;
};

struct ConfidenceSample {
  double confidence = 0.0;
  int outcome = 0;

  bool operator==(const ConfidenceSample&) const = default;
};

struct Bin {
  std::size_t count = 0;
  double mean_confidence = 0.0;
  double mean_accuracy = 0.0;
};

/// Equal-mass reliability diagram.
struct BinnedDiagram {
  std::vector<Bin> bins;
  std::size_t total_n = 0;
};

struct PlattParams {
  double alpha = 1.0;
  double beta = 0.0;

  bool operator==(const PlattParams&) const = default;
};

enum class RecalibratorKind { platt, temperature, actionwise_platt, actionwise_temperature };

struct FitMetadata {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  bool converged = false;
  int iterations = 0;

  bool operator==(const FitMetadata&) const = default;
};

/// A fitted confidence transform. `platt` holds one entry for the global
/// variant and D entries for the action-wise one; `temperatures` likewise.
struct Recalibrator {
  RecalibratorKind kind = RecalibratorKind::platt;
  std::vector<PlattParams> platt;
  std::vector<double> temperatures;
  FitMetadata meta;

  static Recalibrator make_platt(PlattParams p);
  static Recalibrator make_temperature(double t);
  static Recalibrator make_actionwise_platt(std::vector<PlattParams> params);
  static Recalibrator make_actionwise_temperature(std::vector<double> temps);

  /// Number of dimensions the transform expects (1 for the global kinds).
  std::size_t dimension() const;

  bool operator==(const Recalibrator&) const = default;
};

std::string_view to_string(RecalibratorKind kind);
RecalibratorKind parse_recalibrator_kind(std::string_view name);

/// Per-completion-level halting thresholds, keyed by completion percent 0..99.
struct ThresholdProfile {
  double quantile_level = 0.1;
  std::map<int, double> thresholds;

  bool complete() const;
};

inline constexpr int kCompletionLevels = 100;

// --- validation -------------------------------------------------------------

void validate(const DimensionStep& step);
void validate(const EpisodeRecord& episode);
void validate(const ConfidenceSample& sample);
void validate(const Recalibrator& r);

/// Returns the common D of all episodes; throws MixedDimensions otherwise.
std::size_t shared_dimension(std::span<const EpisodeRecord> episodes);

// --- softmax helpers ----------------------------------------------------------

/// softmax(logits / temperature) evaluated at one index.
double softmax_at(std::span<const double> logits, std::size_t index, double temperature = 1.0);
/// max_k softmax(logits / temperature)_k.
double max_softmax(std::span<const double> logits, double temperature = 1.0);
std::vector<double> softmax(std::span<const double> logits, double temperature = 1.0);
/// Index of the first maximal element.
std::size_t argmax(std::span<const double> values);

/// Stateless seed mixing (splitmix64), used to give every episode / split its
/// own reproducible stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace calibkit
