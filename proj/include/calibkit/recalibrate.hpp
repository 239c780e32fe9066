#pragma once

// Post hoc recalibration. All fitters minimise the clamped mean NLL on a
// calibration split and return an immutable Recalibrator; the chosen action
// tokens are never touched, only the reported confidence.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "calibkit/core.hpp"

namespace calibkit {

struct FitConfig {
  int max_iterations = 200;
  double gradient_tolerance = 1e-10;
  /// Absolute clamp on alpha/beta, and on log T for temperature fits.
  double param_bound = 50.0;
  double epsilon = 1e-12;
  /// Platt's (N+ + 1)/(N+ + 2) target smoothing; off by default.
  bool target_smoothing = false;
  /// Recorded in the fit metadata only.
  std::uint64_t seed = 0;
};

/// Per-dimension selected-token probabilities, one row per trial.
struct DimSamples {
  std::vector<std::vector<double>> per_dim_confidence;
  std::vector<int> outcomes;

  std::size_t size() const { return outcomes.size(); }
  std::size_t dimension() const;
};

/// Full logits, indexed [trial][dimension][token].
struct LogitSamples {
  std::vector<std::vector<std::vector<double>>> logits;
  std::vector<int> outcomes;

  std::size_t size() const { return outcomes.size(); }
  std::size_t dimension() const;
};

enum class ActionwiseMode { joint, independent };

std::string_view to_string(ActionwiseMode mode);
ActionwiseMode parse_actionwise_mode(std::string_view name);

double sigmoid(double x);

/// Clamped mean NLL of arbitrary confidences against outcomes.
double mean_nll(std::span<const double> confidence, std::span<const int> outcomes, double epsilon);

// --- global Platt -------------------------------------------------------------

/// Damped Newton on (alpha, beta) from (1, 0), halving the step until the NLL
/// decreases.
Recalibrator fit_platt(std::span<const ConfidenceSample> samples, const FitConfig& cfg = {});
double apply_platt(const Recalibrator& r, double c);
/// Training objective of fit_platt at given parameters.
double platt_nll(std::span<const ConfidenceSample> samples, PlattParams p, double epsilon = 1e-12);

// --- action-wise Platt --------------------------------------------------------

/// joint: minimises the NLL of the averaged per-dimension sigmoids over all 2D
/// parameters (quasi-Newton directions with backtracking). independent: one
/// global Platt fit per dimension against the shared outcomes.
Recalibrator fit_actionwise_platt(const DimSamples& data, const FitConfig& cfg = {},
                                  ActionwiseMode mode = ActionwiseMode::joint);
double apply_actionwise_platt(const Recalibrator& r, std::span<const double> dims);
double actionwise_platt_nll(const DimSamples& data, std::span<const PlattParams> params,
                            double epsilon = 1e-12);

// --- temperature scaling ------------------------------------------------------

/// Confidence recomputed from logits: mean over dimensions of the max
/// softmax(z_d / T_d). `temperatures` has length 1 (shared) or D.
double temperature_confidence(const std::vector<std::vector<double>>& dim_logits,
                              std::span<const double> temperatures);

/// One shared T by golden-section search over log T in [-5, 5] (tolerance 1e-6).
Recalibrator fit_temperature(const LogitSamples& data, const FitConfig& cfg = {});
/// Per-dimension T_d by coordinate descent of golden-section searches,
/// starting from the shared fit.
Recalibrator fit_actionwise_temperature(const LogitSamples& data, const FitConfig& cfg = {});
double apply_temperature(const Recalibrator& r, const std::vector<std::vector<double>>& dim_logits);
double temperature_nll(const LogitSamples& data, std::span<const double> temperatures,
                       double epsilon = 1e-12);

/// Minimises f on [lo, hi] by golden-section search; returns the midpoint of
/// the final bracket once its width is below `tolerance`.
template <class F>
double golden_section_minimize(F&& f, double lo, double hi, double tolerance);

// --- applying -----------------------------------------------------------------

/// Scalar inputs: platt only.
std::vector<ConfidenceSample> recalibrate_samples(const Recalibrator& r,
                                                  std::span<const ConfidenceSample> inputs);
/// Per-dimension inputs: actionwise_platt, or platt applied to the dimension mean.
std::vector<ConfidenceSample> recalibrate_samples(const Recalibrator& r, const DimSamples& inputs);
/// Logit inputs: every kind (Platt kinds read max-softmax confidences at T = 1).
std::vector<ConfidenceSample> recalibrate_samples(const Recalibrator& r, const LogitSamples& inputs);

// --- data extraction and splits ------------------------------------------------

/// Variant-0 confidences at timestep t for every episode.
DimSamples dim_samples_at(std::span<const EpisodeRecord> episodes, std::size_t t = 1);
/// Variant-0 logits at timestep t; throws MissingLogits if any are absent.
LogitSamples logit_samples_at(std::span<const EpisodeRecord> episodes, std::size_t t = 1);

/// Mean over dimensions, i.e. the baseline confidence per trial.
std::vector<ConfidenceSample> baseline_samples(const DimSamples& data);

DimSamples subset(const DimSamples& data, std::span<const std::size_t> rows);
LogitSamples subset(const LogitSamples& data, std::span<const std::size_t> rows);

struct Split {
  std::vector<std::size_t> calibration;
  std::vector<std::size_t> test;
};

/// Seeded random partition; the calibration part gets round(fraction * n) rows.
Split random_split(std::size_t n, double calibration_fraction, std::uint64_t seed);

// --- implementation of the template -------------------------------------------

template <class F>
double golden_section_minimize(F&& f, double lo, double hi, double tolerance) {
  const double inv_phi = 0.6180339887498949;  // (sqrt(5) - 1) / 2
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tolerance) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace calibkit
