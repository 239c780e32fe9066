#pragma once

// Repeated-draw evaluation protocols: ensemble-size ablation over random
// variant subsets, and recalibration over random calibration/test splits.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "calibkit/core.hpp"
#include "calibkit/metrics.hpp"
#include "calibkit/recalibrate.hpp"

namespace calibkit {

struct AblationRow {
  std::size_t k = 0;
  std::size_t trials = 0;
  double mean_ece1 = 0.0;
  double sd_ece1 = 0.0;
  double mean_ece2 = 0.0;
  double mean_brier = 0.0;
  double mean_nll = 0.0;
};

/// For each k, `trials` times: every episode draws k of its variants without
/// replacement, and the pre-action ensemble confidences are scored. Trial j of
/// size k uses derive_seed(seed, k) and derive_seed(., j) per episode index.
std::vector<AblationRow> ensemble_ablation(std::span<const EpisodeRecord> episodes,
                                           std::span<const std::size_t> k_list, std::size_t trials,
                                           std::uint64_t seed, std::size_t m_bins = kDefaultBins);

enum class RecalibrationMethod { platt, temperature, actionwise_platt, actionwise_temperature };

RecalibrationMethod parse_recalibration_method(std::string_view name);
std::string_view to_string(RecalibrationMethod method);

struct StudyConfig {
  RecalibrationMethod method = RecalibrationMethod::platt;
  ActionwiseMode mode = ActionwiseMode::joint;
  double calibration_fraction = 0.2;
  std::size_t splits = 1000;
  std::uint64_t seed = 0;
  std::size_t m_bins = kDefaultBins;
  FitConfig fit;
};

struct SplitOutcome {
  std::size_t split = 0;
  std::uint64_t seed = 0;
  std::size_t n_calibration = 0;
  std::size_t n_test = 0;
  MetricReport before;  // raw baseline confidence on the test part
  MetricReport after;   // recalibrated confidence on the test part
  bool converged = false;
};

struct StudyResult {
  std::vector<SplitOutcome> splits;
  MetricReport mean_before;
  MetricReport mean_after;
  /// Splits whose recalibrated test ECE_1 is below the raw one.
  std::size_t improved_ece1 = 0;
};

/// Fits on the calibration part and scores the test part of each split, using
/// pre-action (t = 1) variant-0 data. Split s uses derive_seed(seed, s).
StudyResult recalibration_study(std::span<const EpisodeRecord> episodes, const StudyConfig& config);

/// Fits the configured method on every episode's pre-action data.
Recalibrator fit_on_all(std::span<const EpisodeRecord> episodes, const StudyConfig& config);

}  // namespace calibkit
