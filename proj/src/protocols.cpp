#include "calibkit/protocols.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "calibkit/confidence.hpp"
#include "calibkit/parallel.hpp"

namespace calibkit {

std::vector<AblationRow> ensemble_ablation(std::span<const EpisodeRecord> episodes,
                                           std::span<const std::size_t> k_list, std::size_t trials,
                                           std::uint64_t seed, std::size_t m_bins) {
  if (episodes.empty()) throw Error(ErrorCode::EmptyInput, "no episodes");
  if (trials == 0) throw Error(ErrorCode::InvalidArgument, "trials must be >= 1");
  std::vector<std::vector<double>> baselines(episodes.size());
  parallel_for(episodes.size(), [&](std::size_t i) { baselines[i] = variant_baselines_at(episodes[i], 1); });
  for (std::size_t k : k_list) {
    for (std::size_t i = 0; i < episodes.size(); ++i) {
      if (k == 0 || k > baselines[i].size()) {
        throw Error(ErrorCode::KTooLarge, "k=" + std::to_string(k) + " but episode '" + episodes[i].episode_id +
                                              "' has " + std::to_string(baselines[i].size()) + " variants");
      }
    }
  }

  std::vector<AblationRow> rows;
  for (std::size_t k : k_list) {
    std::vector<MetricReport> reports(trials);
    const std::uint64_t k_seed = derive_seed(seed, k);
    parallel_for(trials, [&](std::size_t trial) {
      const std::uint64_t trial_seed = derive_seed(k_seed, trial);
      std::vector<ConfidenceSample> samples(episodes.size());
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < episodes.size(); ++i) {
        const auto& b = baselines[i];
        std::mt19937_64 rng(derive_seed(trial_seed, i));
        idx.resize(b.size());
        std::iota(idx.begin(), idx.end(), 0);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
          std::uniform_int_distribution<std::size_t> pick(j, b.size() - 1);
          std::swap(idx[j], idx[pick(rng)]);
          sum += b[idx[j]];
        }
        samples[i] = {sum / static_cast<double>(k), episodes[i].outcome};
      }
      reports[trial] = metric_report(samples, m_bins);
    });
    AblationRow row;
    row.k = k;
    row.trials = trials;
    const auto n = static_cast<double>(trials);
    for (const auto& r : reports) {
      row.mean_ece1 += r.ece1 / n;
      row.mean_ece2 += r.ece2 / n;
      row.mean_brier += r.brier / n;
      row.mean_nll += r.nll / n;
    }
    double ss = 0.0;
    for (const auto& r : reports) ss += (r.ece1 - row.mean_ece1) * (r.ece1 - row.mean_ece1);
    row.sd_ece1 = trials > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

RecalibrationMethod parse_recalibration_method(std::string_view name) {
  if (name == "platt") return RecalibrationMethod::platt;
  if (name == "temperature") return RecalibrationMethod::temperature;
  if (name == "aw-platt") return RecalibrationMethod::actionwise_platt;
  if (name == "aw-temp") return RecalibrationMethod::actionwise_temperature;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + std::string(name) + "'");
}

std::string_view to_string(RecalibrationMethod method) {
  switch (method) {
    case RecalibrationMethod::platt: return "platt";
    case RecalibrationMethod::temperature: return "temperature";
    case RecalibrationMethod::actionwise_platt: return "aw-platt";
    case RecalibrationMethod::actionwise_temperature: return "aw-temp";
  }
  return "unknown";
}

namespace {

bool needs_logits(RecalibrationMethod m) {
  return m == RecalibrationMethod::temperature || m == RecalibrationMethod::actionwise_temperature;
}

struct StudyData {
  DimSamples dims;
  LogitSamples logits;  // filled only for temperature methods
};

StudyData load(std::span<const EpisodeRecord> episodes, RecalibrationMethod method) {
  StudyData d;
  d.dims = dim_samples_at(episodes, 1);
  if (needs_logits(method)) d.logits = logit_samples_at(episodes, 1);
  return d;
}

Recalibrator fit(const StudyData& data, std::span<const std::size_t> rows, const StudyConfig& cfg,
                 std::uint64_t seed) {
  FitConfig fc = cfg.fit;
  fc.seed = seed;
  switch (cfg.method) {
    case RecalibrationMethod::platt: {
      const auto s = baseline_samples(subset(data.dims, rows));
      return fit_platt(s, fc);
    }
    case RecalibrationMethod::actionwise_platt: return fit_actionwise_platt(subset(data.dims, rows), fc, cfg.mode);
    case RecalibrationMethod::temperature: return fit_temperature(subset(data.logits, rows), fc);
    case RecalibrationMethod::actionwise_temperature:
      return fit_actionwise_temperature(subset(data.logits, rows), fc);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown method");
}

std::vector<ConfidenceSample> apply(const Recalibrator& r, const StudyData& data, std::span<const std::size_t> rows,
                                    RecalibrationMethod method) {
  if (needs_logits(method)) return recalibrate_samples(r, subset(data.logits, rows));
  return recalibrate_samples(r, subset(data.dims, rows));
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

}  // namespace

StudyResult recalibration_study(std::span<const EpisodeRecord> episodes, const StudyConfig& cfg) {
  if (episodes.empty()) throw Error(ErrorCode::EmptyInput, "no episodes");
  if (cfg.splits == 0) throw Error(ErrorCode::InvalidArgument, "splits must be >= 1");
  const StudyData data = load(episodes, cfg.method);
  StudyResult result;
  result.splits.resize(cfg.splits);
  parallel_for(cfg.splits, [&](std::size_t s) {
    const std::uint64_t seed = derive_seed(cfg.seed, s);
    const Split split = random_split(episodes.size(), cfg.calibration_fraction, seed);
    const Recalibrator r = fit(data, split.calibration, cfg, seed);
    SplitOutcome& out = result.splits[s];
    out.split = s;
    out.seed = seed;
    out.n_calibration = split.calibration.size();
    out.n_test = split.test.size();
    out.before = metric_report(baseline_samples(subset(data.dims, split.test)), cfg.m_bins);
    out.after = metric_report(apply(r, data, split.test, cfg.method), cfg.m_bins);
    out.converged = r.meta.converged;
  });
  const auto n = static_cast<double>(cfg.splits);
  auto accumulate = [n](MetricReport& acc, const MetricReport& r) {
    acc.ece1 += r.ece1 / n;
    acc.ece2 += r.ece2 / n;
    acc.brier += r.brier / n;
    acc.nll += r.nll / n;
    acc.n = r.n;
    acc.m_bins = r.m_bins;
  };
  for (const auto& s : result.splits) {
    accumulate(result.mean_before, s.before);
    accumulate(result.mean_after, s.after);
    result.improved_ece1 += s.after.ece1 < s.before.ece1;
  }
  return result;
}

Recalibrator fit_on_all(std::span<const EpisodeRecord> episodes, const StudyConfig& config) {
  if (episodes.empty()) throw Error(ErrorCode::EmptyInput, "no episodes");
  const StudyData data = load(episodes, config.method);
  return fit(data, all_rows(episodes.size()), config, config.seed);
}

}  // namespace calibkit
