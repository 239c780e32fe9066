#include "calibkit/recalibrate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>
#include <string>

namespace calibkit {

std::string_view to_string(ActionwiseMode mode) {
  return mode == ActionwiseMode::joint ? "joint" : "independent";
}

ActionwiseMode parse_actionwise_mode(std::string_view name) {
  if (name == "joint") return ActionwiseMode::joint;
  if (name == "independent") return ActionwiseMode::independent;
  throw Error(ErrorCode::InvalidArgument, "unknown action-wise mode '" + std::string(name) + "'");
}

std::size_t DimSamples::dimension() const {
  return per_dim_confidence.empty() ? 0 : per_dim_confidence.front().size();
}

std::size_t LogitSamples::dimension() const { return logits.empty() ? 0 : logits.front().size(); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double mean_nll(std::span<const double> confidence, std::span<const int> outcomes, double epsilon) {
  double acc = 0.0;
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    const double c = std::clamp(confidence[i], epsilon, 1.0 - epsilon);
    acc += outcomes[i] == 1 ? std::log(c) : std::log1p(-c);
  }
  return -acc / static_cast<double>(confidence.size());
}

namespace {

void require_both_classes(std::span<const int> outcomes) {
  if (outcomes.empty()) throw Error(ErrorCode::EmptyInput, "no calibration samples");
  bool any0 = false;
  bool any1 = false;
  for (int y : outcomes) {
    if (y != 0 && y != 1) throw Error(ErrorCode::OutOfRange, "outcome must be 0 or 1");
    any0 |= y == 0;
    any1 |= y == 1;
  }
  if (!any0 || !any1) {
    throw Error(ErrorCode::Degenerate, "calibration data needs at least one success and one failure");
  }
}

/// Per-sample regression targets: the outcomes, or Platt's smoothed targets.
std::vector<double> make_targets(std::span<const int> outcomes, bool smoothing) {
  std::vector<double> t(outcomes.begin(), outcomes.end());
  if (!smoothing) return t;
  const auto pos = static_cast<double>(std::count(outcomes.begin(), outcomes.end(), 1));
  const auto neg = static_cast<double>(outcomes.size()) - pos;
  const double hi = (pos + 1.0) / (pos + 2.0);
  const double lo = 1.0 / (neg + 2.0);
  for (double& v : t) v = v > 0.5 ? hi : lo;
  return t;
}

/// Cross-entropy of a clamped probability against a (possibly soft) target.
double cross_entropy(double g, double target, double eps) {
  const double c = std::clamp(g, eps, 1.0 - eps);
  return -(target * std::log(c) + (1.0 - target) * std::log1p(-c));
}

struct PlattEval {
  double f = 0.0;
  std::array<double, 2> grad{};
  std::array<double, 3> hess{};  // (aa, ab, bb)
};

PlattEval platt_eval(std::span<const double> c, std::span<const double> targets, PlattParams p, double eps) {
  PlattEval e;
  const auto n = static_cast<double>(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double g = sigmoid(p.alpha * c[i] + p.beta);
    e.f += cross_entropy(g, targets[i], eps);
    if (g <= eps || g >= 1.0 - eps) continue;  // flat where clamped
    const double r = g - targets[i];
    const double w = g * (1.0 - g);
    e.grad[0] += r * c[i];
    e.grad[1] += r;
    e.hess[0] += w * c[i] * c[i];
    e.hess[1] += w * c[i];
    e.hess[2] += w;
  }
  e.f /= n;
  for (double& v : e.grad) v /= n;
  for (double& v : e.hess) v /= n;
  return e;
}

double platt_objective(std::span<const double> c, std::span<const double> targets, PlattParams p, double eps) {
  double f = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) f += cross_entropy(sigmoid(p.alpha * c[i] + p.beta), targets[i], eps);
  return f / static_cast<double>(c.size());
}

PlattParams clamp_params(PlattParams p, double bound) {
  return {std::clamp(p.alpha, -bound, bound), std::clamp(p.beta, -bound, bound)};
}

Recalibrator fit_platt_scalars(std::span<const double> c, std::span<const int> outcomes, const FitConfig& cfg) {
  require_both_classes(outcomes);
  const std::vector<double> targets = make_targets(outcomes, cfg.target_smoothing);

  PlattParams p{1.0, 0.0};
  PlattEval cur = platt_eval(c, targets, p, cfg.epsilon);
  bool converged = false;
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    if (!std::isfinite(cur.f)) throw Error(ErrorCode::NonFinite, "Platt objective is not finite");
    if (std::max(std::abs(cur.grad[0]), std::abs(cur.grad[1])) < cfg.gradient_tolerance) {
      converged = true;
      break;
    }
    // Newton direction from the 2x2 Hessian, falling back to steepest descent.
    const double det = cur.hess[0] * cur.hess[2] - cur.hess[1] * cur.hess[1];
    double da = -cur.grad[0];
    double db = -cur.grad[1];
    if (det > 1e-300 && cur.hess[0] > 0.0) {
      da = -(cur.hess[2] * cur.grad[0] - cur.hess[1] * cur.grad[1]) / det;
      db = -(-cur.hess[1] * cur.grad[0] + cur.hess[0] * cur.grad[1]) / det;
      if (da * cur.grad[0] + db * cur.grad[1] >= 0.0) {
        da = -cur.grad[0];
        db = -cur.grad[1];
      }
    }
    double step = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
      const PlattParams cand = clamp_params({p.alpha + step * da, p.beta + step * db}, cfg.param_bound);
      const double f = platt_objective(c, targets, cand, cfg.epsilon);
      if (f < cur.f) {
        p = cand;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No representable decrease left: stationary to working precision when
      // the predicted decrease is below the rounding level of the objective.
      converged = -(da * cur.grad[0] + db * cur.grad[1]) <= 1e-15 * std::max(1.0, std::abs(cur.f));
      break;
    }
    cur = platt_eval(c, targets, p, cfg.epsilon);
  }
  if (!std::isfinite(p.alpha) || !std::isfinite(p.beta)) {
    throw Error(ErrorCode::NonFinite, "Platt parameters diverged");
  }
  if (!converged) {
    converged = std::max(std::abs(cur.grad[0]), std::abs(cur.grad[1])) < cfg.gradient_tolerance;
  }
  Recalibrator r = Recalibrator::make_platt(p);
  r.meta = {c.size(), cfg.seed, converged, it};
  return r;
}

// --- joint action-wise objective ---------------------------------------------

struct JointProblem {
  const DimSamples& data;
  std::vector<double> targets;
  double eps;
  std::size_t dims;

  /// theta = (alpha_0..alpha_{D-1}, beta_0..beta_{D-1}).
  double value(std::span<const double> theta, std::vector<double>* grad) const {
    const std::size_t n = data.size();
    const auto dn = static_cast<double>(dims);
    double f = 0.0;
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
    std::vector<double> s(dims);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& row = data.per_dim_confidence[i];
      double q = 0.0;
      for (std::size_t d = 0; d < dims; ++d) {
        s[d] = sigmoid(theta[d] * row[d] + theta[dims + d]);
        q += s[d];
      }
      q /= dn;
      f += cross_entropy(q, targets[i], eps);
      if (!grad || q <= eps || q >= 1.0 - eps) continue;
      const double dq = (q - targets[i]) / (q * (1.0 - q)) / dn;
      for (std::size_t d = 0; d < dims; ++d) {
        const double w = dq * s[d] * (1.0 - s[d]);
        (*grad)[d] += w * row[d];
        (*grad)[dims + d] += w;
      }
    }
    const auto nn = static_cast<double>(n);
    if (grad) {
      for (double& g : *grad) g /= nn;
    }
    return f / nn;
  }
};

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

/// Gradient with the components that push against an active bound zeroed.
void project_gradient(std::span<const double> theta, std::span<const double> grad, double bound,
                      std::span<double> out) {
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const bool at_lower = theta[k] <= -bound && grad[k] > 0.0;
    const bool at_upper = theta[k] >= bound && grad[k] < 0.0;
    out[k] = at_lower || at_upper ? 0.0 : grad[k];
  }
}

/// Projected L-BFGS: quasi-Newton directions over the coordinates not held at
/// a bound, projected Armijo backtracking, convergence on the projected gradient.
Recalibrator fit_joint(const DimSamples& data, const FitConfig& cfg, std::span<const PlattParams> start) {
  const std::size_t dims = data.dimension();
  JointProblem prob{data, make_targets(data.outcomes, cfg.target_smoothing), cfg.epsilon, dims};
  const std::size_t np = 2 * dims;
  const double bound = cfg.param_bound;

  std::vector<double> theta(np);
  for (std::size_t d = 0; d < dims; ++d) {
    theta[d] = std::clamp(start[d].alpha, -bound, bound);
    theta[dims + d] = std::clamp(start[d].beta, -bound, bound);
  }
  std::vector<double> grad(np);
  double f = prob.value(theta, &grad);

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> memory;
  constexpr std::size_t kMemory = 10;

  std::vector<double> pg(np), dir(np), cand(np), cand_grad(np), alphas;
  bool converged = false;
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    if (!std::isfinite(f)) throw Error(ErrorCode::NonFinite, "action-wise objective is not finite");
    project_gradient(theta, grad, bound, pg);
    if (inf_norm(pg) < cfg.gradient_tolerance) {
      converged = true;
      break;
    }
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        if (memory.empty()) break;
        memory.clear();
      }
      // Two-loop recursion on the projected gradient: dir = -H * pg.
      for (std::size_t k = 0; k < np; ++k) dir[k] = -pg[k];
      if (memory.empty()) {
        const double norm = std::sqrt(dot(pg, pg));
        for (double& v : dir) v /= norm;
      } else {
        alphas.assign(memory.size(), 0.0);
        for (std::size_t m = memory.size(); m-- > 0;) {
          alphas[m] = memory[m].rho * dot(memory[m].s, dir);
          for (std::size_t k = 0; k < np; ++k) dir[k] -= alphas[m] * memory[m].y[k];
        }
        const auto& last = memory.back();
        const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
        for (double& v : dir) v *= gamma;
        for (std::size_t m = 0; m < memory.size(); ++m) {
          const double b = memory[m].rho * dot(memory[m].y, dir);
          for (std::size_t k = 0; k < np; ++k) dir[k] += memory[m].s[k] * (alphas[m] - b);
        }
        for (std::size_t k = 0; k < np; ++k) {
          if (pg[k] == 0.0 && grad[k] != 0.0) dir[k] = 0.0;  // held at a bound
        }
      }
      if (dot(pg, dir) >= 0.0) {
        memory.clear();
        const double norm = std::sqrt(dot(pg, pg));
        for (std::size_t k = 0; k < np; ++k) dir[k] = -pg[k] / norm;
      }
      double step = 1.0;
      for (int halving = 0; halving < 50; ++halving, step *= 0.5) {
        for (std::size_t k = 0; k < np; ++k) cand[k] = std::clamp(theta[k] + step * dir[k], -bound, bound);
        double decrease = 0.0;  // first-order change along the projected step
        for (std::size_t k = 0; k < np; ++k) decrease += grad[k] * (cand[k] - theta[k]);
        if (decrease >= 0.0) continue;
        const double fc = prob.value(cand, &cand_grad);
        if (fc < f && fc <= f + 1e-4 * decrease) {
          Pair pr{std::vector<double>(np), std::vector<double>(np), 0.0};
          for (std::size_t k = 0; k < np; ++k) {
            pr.s[k] = cand[k] - theta[k];
            pr.y[k] = cand_grad[k] - grad[k];
          }
          const double sy = dot(pr.s, pr.y);
          if (sy > 1e-12 * dot(pr.y, pr.y)) {
            pr.rho = 1.0 / sy;
            memory.push_back(std::move(pr));
            if (memory.size() > kMemory) memory.pop_front();
          }
          theta = cand;
          grad = cand_grad;
          f = fc;
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) break;
  }
  project_gradient(theta, grad, bound, pg);
  if (!converged) converged = inf_norm(pg) < cfg.gradient_tolerance;

  std::vector<PlattParams> params(dims);
  for (std::size_t d = 0; d < dims; ++d) params[d] = {theta[d], theta[dims + d]};
  Recalibrator r = Recalibrator::make_actionwise_platt(std::move(params));
  r.meta = {data.size(), cfg.seed, converged, it};
  return r;
}

double joint_objective(const DimSamples& data, const FitConfig& cfg, std::span<const PlattParams> params) {
  const std::size_t dims = params.size();
  std::vector<double> theta(2 * dims);
  for (std::size_t d = 0; d < dims; ++d) {
    theta[d] = params[d].alpha;
    theta[dims + d] = params[d].beta;
  }
  JointProblem prob{data, make_targets(data.outcomes, cfg.target_smoothing), cfg.epsilon, dims};
  return prob.value(theta, nullptr);
}

void check_dim_samples(const DimSamples& data) {
  if (data.per_dim_confidence.size() != data.outcomes.size()) {
    throw Error(ErrorCode::ShapeMismatch, "confidence rows and outcomes differ in length");
  }
  const std::size_t dims = data.dimension();
  for (const auto& row : data.per_dim_confidence) {
    if (row.size() != dims) throw Error(ErrorCode::ShapeMismatch, "per-dimension rows are ragged");
    for (double c : row) {
      if (!std::isfinite(c) || c < 0.0 || c > 1.0) throw Error(ErrorCode::OutOfRange, "confidence outside [0,1]");
    }
  }
}

// --- temperature helpers -------------------------------------------------------

/// Logits shifted so each (trial, dimension) maximum is zero, stored flat.
struct ShiftedLogits {
  std::vector<double> values;
  std::vector<std::size_t> offsets;  // (n * D + 1) entries
  std::size_t n = 0;
  std::size_t dims = 0;

  explicit ShiftedLogits(const LogitSamples& data) : n(data.size()), dims(data.dimension()) {
    offsets.reserve(n * dims + 1);
    offsets.push_back(0);
    for (const auto& trial : data.logits) {
      if (trial.size() != dims) throw Error(ErrorCode::ShapeMismatch, "logit rows are ragged");
      for (const auto& z : trial) {
        if (z.size() < 2) throw Error(ErrorCode::MissingLogits, "need at least two logits per dimension");
        const double zmax = *std::max_element(z.begin(), z.end());
        for (double v : z) values.push_back(v - zmax);
        offsets.push_back(values.size());
      }
    }
  }

  double max_prob(std::size_t i, std::size_t d, double temperature) const {
    const std::size_t cell = i * dims + d;
    double denom = 0.0;
    for (std::size_t k = offsets[cell]; k < offsets[cell + 1]; ++k) denom += std::exp(values[k] / temperature);
    return 1.0 / denom;
  }
};

void check_logit_samples(const LogitSamples& data) {
  if (data.logits.size() != data.outcomes.size()) {
    throw Error(ErrorCode::ShapeMismatch, "logit rows and outcomes differ in length");
  }
  if (data.dimension() == 0 && !data.logits.empty()) throw Error(ErrorCode::MissingLogits, "no logits");
}

double temperature_search_bound(const FitConfig& cfg) { return std::min(5.0, cfg.param_bound); }

}  // namespace

// --- public: Platt ---------------------------------------------------------------

Recalibrator fit_platt(std::span<const ConfidenceSample> samples, const FitConfig& cfg) {
  std::vector<double> c;
  std::vector<int> y;
  c.reserve(samples.size());
  y.reserve(samples.size());
  for (const auto& s : samples) {
    validate(s);
    c.push_back(s.confidence);
    y.push_back(s.outcome);
  }
  return fit_platt_scalars(c, y, cfg);
}

double platt_nll(std::span<const ConfidenceSample> samples, PlattParams p, double epsilon) {
  double f = 0.0;
  for (const auto& s : samples) f += cross_entropy(sigmoid(p.alpha * s.confidence + p.beta), s.outcome, epsilon);
  return f / static_cast<double>(samples.size());
}

double apply_platt(const Recalibrator& r, double c) {
  if (r.kind != RecalibratorKind::platt) throw Error(ErrorCode::KindMismatch, "expected a platt recalibrator");
  if (!std::isfinite(c) || c < 0.0 || c > 1.0) throw Error(ErrorCode::OutOfRange, "confidence outside [0,1]");
  return sigmoid(r.platt.front().alpha * c + r.platt.front().beta);
}

Recalibrator fit_actionwise_platt(const DimSamples& data, const FitConfig& cfg, ActionwiseMode mode) {
  check_dim_samples(data);
  require_both_classes(data.outcomes);
  if (data.dimension() == 0) throw Error(ErrorCode::EmptyDims, "no dimensions");

  const std::size_t dims = data.dimension();
  std::vector<PlattParams> params;
  bool converged = true;
  int iterations = 0;
  std::vector<double> column(data.size());
  for (std::size_t d = 0; d < dims; ++d) {
    for (std::size_t i = 0; i < data.size(); ++i) column[i] = data.per_dim_confidence[i][d];
    const Recalibrator one = fit_platt_scalars(column, data.outcomes, cfg);
    params.push_back(one.platt.front());
    converged = converged && one.meta.converged;
    iterations = std::max(iterations, one.meta.iterations);
  }
  if (mode == ActionwiseMode::independent) {
    Recalibrator r = Recalibrator::make_actionwise_platt(std::move(params));
    r.meta = {data.size(), cfg.seed, converged, iterations};
    return r;
  }

  // The averaged-sigmoid objective is non-convex: a dimension whose sigmoid
  // saturates early stops receiving gradient. Descend from the (1, 0) start
  // and from the independent per-dimension fits; keep the lower training NLL.
  const std::vector<PlattParams> unit(dims, PlattParams{1.0, 0.0});
  Recalibrator from_unit = fit_joint(data, cfg, unit);
  Recalibrator from_independent = fit_joint(data, cfg, params);
  const double f_unit = joint_objective(data, cfg, from_unit.platt);
  const double f_independent = joint_objective(data, cfg, from_independent.platt);
  return f_independent < f_unit ? from_independent : from_unit;
}

double apply_actionwise_platt(const Recalibrator& r, std::span<const double> dims) {
  if (r.kind != RecalibratorKind::actionwise_platt) {
    throw Error(ErrorCode::KindMismatch, "expected an actionwise_platt recalibrator");
  }
  if (dims.size() != r.platt.size()) {
    throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(r.platt.size()) + " dimensions, got " +
                                                  std::to_string(dims.size()));
  }
  double sum = 0.0;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    if (!std::isfinite(dims[d]) || dims[d] < 0.0 || dims[d] > 1.0) {
      throw Error(ErrorCode::OutOfRange, "confidence outside [0,1]");
    }
    sum += sigmoid(r.platt[d].alpha * dims[d] + r.platt[d].beta);
  }
  return sum / static_cast<double>(dims.size());
}

double actionwise_platt_nll(const DimSamples& data, std::span<const PlattParams> params, double epsilon) {
  const std::size_t dims = params.size();
  std::vector<double> theta(2 * dims);
  for (std::size_t d = 0; d < dims; ++d) {
    theta[d] = params[d].alpha;
    theta[dims + d] = params[d].beta;
  }
  JointProblem prob{data, std::vector<double>(data.outcomes.begin(), data.outcomes.end()), epsilon, dims};
  return prob.value(theta, nullptr);
}

// --- public: temperature ---------------------------------------------------------

double temperature_confidence(const std::vector<std::vector<double>>& dim_logits,
                              std::span<const double> temperatures) {
  if (dim_logits.empty()) throw Error(ErrorCode::EmptyDims, "no dimensions");
  if (temperatures.size() != 1 && temperatures.size() != dim_logits.size()) {
    throw Error(ErrorCode::DimensionMismatch, "temperature count must be 1 or D");
  }
  double sum = 0.0;
  for (std::size_t d = 0; d < dim_logits.size(); ++d) {
    if (dim_logits[d].empty()) throw Error(ErrorCode::MissingLogits, "empty logit vector");
    sum += max_softmax(dim_logits[d], temperatures.size() == 1 ? temperatures[0] : temperatures[d]);
  }
  return sum / static_cast<double>(dim_logits.size());
}

double temperature_nll(const LogitSamples& data, std::span<const double> temperatures, double epsilon) {
  std::vector<double> conf;
  conf.reserve(data.size());
  for (const auto& trial : data.logits) conf.push_back(temperature_confidence(trial, temperatures));
  return mean_nll(conf, data.outcomes, epsilon);
}

Recalibrator fit_temperature(const LogitSamples& data, const FitConfig& cfg) {
  check_logit_samples(data);
  require_both_classes(data.outcomes);
  const ShiftedLogits shifted(data);
  const auto dn = static_cast<double>(shifted.dims);
  std::vector<double> conf(data.size());
  int evaluations = 0;
  auto objective = [&](double log_t) {
    ++evaluations;
    const double t = std::exp(log_t);
    for (std::size_t i = 0; i < shifted.n; ++i) {
      double s = 0.0;
      for (std::size_t d = 0; d < shifted.dims; ++d) s += shifted.max_prob(i, d, t);
      conf[i] = s / dn;
    }
    return mean_nll(conf, data.outcomes, cfg.epsilon);
  };
  const double bound = temperature_search_bound(cfg);
  const double log_t = golden_section_minimize(objective, -bound, bound, 1e-6);
  Recalibrator r = Recalibrator::make_temperature(std::exp(log_t));
  r.meta = {data.size(), cfg.seed, true, evaluations};
  return r;
}

Recalibrator fit_actionwise_temperature(const LogitSamples& data, const FitConfig& cfg) {
  const Recalibrator global = fit_temperature(data, cfg);
  const ShiftedLogits shifted(data);
  const std::size_t n = shifted.n;
  const std::size_t dims = shifted.dims;
  const auto dn = static_cast<double>(dims);

  std::vector<double> temps(dims, global.temperatures.front());
  // cache[d][i]: max-softmax of dimension d on trial i at temps[d].
  std::vector<std::vector<double>> cache(dims, std::vector<double>(n));
  std::vector<double> total(n, 0.0);
  for (std::size_t d = 0; d < dims; ++d) {
    for (std::size_t i = 0; i < n; ++i) {
      cache[d][i] = shifted.max_prob(i, d, temps[d]);
      total[i] += cache[d][i];
    }
  }
  std::vector<double> conf(n);
  std::vector<double> trial(n);
  auto nll_with = [&](std::size_t d, std::span<const double> column) {
    for (std::size_t i = 0; i < n; ++i) conf[i] = (total[i] - cache[d][i] + column[i]) / dn;
    return mean_nll(conf, data.outcomes, cfg.epsilon);
  };
  for (std::size_t i = 0; i < n; ++i) conf[i] = total[i] / dn;
  double current = mean_nll(conf, data.outcomes, cfg.epsilon);

  const double bound = temperature_search_bound(cfg);
  constexpr int kMaxCycles = 50;
  int cycle = 0;
  bool converged = false;
  for (; cycle < kMaxCycles; ++cycle) {
    const double start = current;
    for (std::size_t d = 0; d < dims; ++d) {
      auto objective = [&](double log_t) {
        const double t = std::exp(log_t);
        for (std::size_t i = 0; i < n; ++i) trial[i] = shifted.max_prob(i, d, t);
        return nll_with(d, trial);
      };
      const double t_new = std::exp(golden_section_minimize(objective, -bound, bound, 1e-6));
      for (std::size_t i = 0; i < n; ++i) trial[i] = shifted.max_prob(i, d, t_new);
      const double f_new = nll_with(d, trial);
      if (f_new < current) {
        temps[d] = t_new;
        for (std::size_t i = 0; i < n; ++i) {
          total[i] += trial[i] - cache[d][i];
          cache[d][i] = trial[i];
        }
        // Re-sum to keep `total` free of accumulated rounding drift.
        for (std::size_t i = 0; i < n; ++i) {
          double s = 0.0;
          for (std::size_t k = 0; k < dims; ++k) s += cache[k][i];
          total[i] = s;
        }
        for (std::size_t i = 0; i < n; ++i) conf[i] = total[i] / dn;
        current = mean_nll(conf, data.outcomes, cfg.epsilon);
      }
    }
    if (start - current < 1e-10) {
      converged = true;
      ++cycle;
      break;
    }
  }
  Recalibrator r = Recalibrator::make_actionwise_temperature(std::move(temps));
  r.meta = {data.size(), cfg.seed, converged, cycle};
  return r;
}

double apply_temperature(const Recalibrator& r, const std::vector<std::vector<double>>& dim_logits) {
  if (r.kind == RecalibratorKind::temperature) return temperature_confidence(dim_logits, r.temperatures);
  if (r.kind == RecalibratorKind::actionwise_temperature) {
    if (dim_logits.size() != r.temperatures.size()) {
      throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(r.temperatures.size()) +
                                                    " dimensions, got " + std::to_string(dim_logits.size()));
    }
    return temperature_confidence(dim_logits, r.temperatures);
  }
  throw Error(ErrorCode::KindMismatch, "expected a temperature recalibrator");
}

// --- public: applying --------------------------------------------------------------

std::vector<ConfidenceSample> recalibrate_samples(const Recalibrator& r,
                                                  std::span<const ConfidenceSample> inputs) {
  if (r.kind != RecalibratorKind::platt) {
    throw Error(ErrorCode::KindMismatch, std::string(to_string(r.kind)) + " cannot consume scalar confidences");
  }
  std::vector<ConfidenceSample> out;
  out.reserve(inputs.size());
  for (const auto& s : inputs) out.push_back({apply_platt(r, s.confidence), s.outcome});
  return out;
}

std::vector<ConfidenceSample> recalibrate_samples(const Recalibrator& r, const DimSamples& inputs) {
  if (inputs.size() == 0) return {};
  check_dim_samples(inputs);
  std::vector<ConfidenceSample> out;
  out.reserve(inputs.size());
  switch (r.kind) {
    case RecalibratorKind::platt:
      for (const auto& s : baseline_samples(inputs)) out.push_back({apply_platt(r, s.confidence), s.outcome});
      return out;
    case RecalibratorKind::actionwise_platt:
      if (inputs.dimension() != r.platt.size()) {
        throw Error(ErrorCode::ShapeMismatch, "input D differs from the recalibrator's D");
      }
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        out.push_back({apply_actionwise_platt(r, inputs.per_dim_confidence[i]), inputs.outcomes[i]});
      }
      return out;
    default:
      throw Error(ErrorCode::KindMismatch, "temperature recalibrators need logits");
  }
}

std::vector<ConfidenceSample> recalibrate_samples(const Recalibrator& r, const LogitSamples& inputs) {
  if (inputs.size() == 0) return {};
  check_logit_samples(inputs);
  if (r.kind == RecalibratorKind::temperature || r.kind == RecalibratorKind::actionwise_temperature) {
    if (r.kind == RecalibratorKind::actionwise_temperature && inputs.dimension() != r.temperatures.size()) {
      throw Error(ErrorCode::ShapeMismatch, "input D differs from the recalibrator's D");
    }
    std::vector<ConfidenceSample> out;
    out.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      out.push_back({apply_temperature(r, inputs.logits[i]), inputs.outcomes[i]});
    }
    return out;
  }
  DimSamples dims;
  dims.outcomes = inputs.outcomes;
  for (const auto& trial : inputs.logits) {
    std::vector<double> row;
    for (const auto& z : trial) row.push_back(max_softmax(z));
    dims.per_dim_confidence.push_back(std::move(row));
  }
  return recalibrate_samples(r, dims);
}

// --- public: extraction -------------------------------------------------------------

DimSamples dim_samples_at(std::span<const EpisodeRecord> episodes, std::size_t t) {
  DimSamples out;
  if (episodes.empty()) return out;
  shared_dimension(episodes);
  for (const auto& e : episodes) {
    const auto& steps = e.canonical().steps;
    if (t == 0 || t > steps.size()) {
      throw Error(ErrorCode::MissingTimestep, "episode '" + e.episode_id + "' has no timestep " + std::to_string(t));
    }
    std::vector<double> row;
    for (const auto& d : steps[t - 1].dims) row.push_back(d.top_prob);
    out.per_dim_confidence.push_back(std::move(row));
    out.outcomes.push_back(e.outcome);
  }
  return out;
}

LogitSamples logit_samples_at(std::span<const EpisodeRecord> episodes, std::size_t t) {
  LogitSamples out;
  if (episodes.empty()) return out;
  shared_dimension(episodes);
  for (const auto& e : episodes) {
    const auto& steps = e.canonical().steps;
    if (t == 0 || t > steps.size()) {
      throw Error(ErrorCode::MissingTimestep, "episode '" + e.episode_id + "' has no timestep " + std::to_string(t));
    }
    std::vector<std::vector<double>> trial;
    for (const auto& d : steps[t - 1].dims) {
      if (!d.logits) {
        throw Error(ErrorCode::MissingLogits, "episode '" + e.episode_id + "' lacks logits at t=" + std::to_string(t));
      }
      trial.push_back(*d.logits);
    }
    out.logits.push_back(std::move(trial));
    out.outcomes.push_back(e.outcome);
  }
  return out;
}

std::vector<ConfidenceSample> baseline_samples(const DimSamples& data) {
  std::vector<ConfidenceSample> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& row = data.per_dim_confidence[i];
    double s = 0.0;
    for (double c : row) s += c;
    out.push_back({s / static_cast<double>(row.size()), data.outcomes[i]});
  }
  return out;
}

DimSamples subset(const DimSamples& data, std::span<const std::size_t> rows) {
  DimSamples out;
  for (std::size_t r : rows) {
    out.per_dim_confidence.push_back(data.per_dim_confidence.at(r));
    out.outcomes.push_back(data.outcomes.at(r));
  }
  return out;
}

LogitSamples subset(const LogitSamples& data, std::span<const std::size_t> rows) {
  LogitSamples out;
  for (std::size_t r : rows) {
    out.logits.push_back(data.logits.at(r));
    out.outcomes.push_back(data.outcomes.at(r));
  }
  return out;
}

Split random_split(std::size_t n, double calibration_fraction, std::uint64_t seed) {
  if (!(calibration_fraction > 0.0 && calibration_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "calibration fraction must lie in (0,1)");
  }
  if (n < 2) throw Error(ErrorCode::TooFewEpisodes, "need at least two trials to split");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto k = static_cast<std::size_t>(std::llround(calibration_fraction * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, 1, n - 1);
  Split s;
  s.calibration.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
  std::sort(s.calibration.begin(), s.calibration.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace calibkit
