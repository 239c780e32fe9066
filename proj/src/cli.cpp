#include "calibkit/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "calibkit/audit.hpp"
#include "calibkit/confidence.hpp"
#include "calibkit/io.hpp"
#include "calibkit/metrics.hpp"
#include "calibkit/monitor.hpp"
#include "calibkit/protocols.hpp"
#include "calibkit/recalibrate.hpp"
#include "calibkit/synth.hpp"
#include "calibkit/temporal.hpp"

namespace calibkit {
namespace {

namespace fs = std::filesystem;

struct LogOptions {
  std::string path;
  bool lenient = false;
};

std::vector<EpisodeRecord> load_log(const std::string& path, bool lenient, std::ostream& err) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  if (!lenient) return parse_log(in);
  ParseResult r = parse_log_lenient(in);
  for (const auto& issue : r.issues) {
    err << path << ": line " << issue.line << ", field " << issue.path << ": " << issue.cause << '\n';
  }
  return std::move(r.episodes);
}

/// Opens out_dir/name for writing, creating the directory on first use.
std::ofstream open_output(const std::string& out_dir, const std::string& name) {
  fs::create_directories(out_dir);
  const fs::path path = fs::path(out_dir) / name;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  return out;
}

std::string fmt(double v) { return format_double(v); }

TemporalAggregation temporal_from(const std::string& name, std::size_t window) {
  return parse_temporal_aggregation(name, window);
}

void print_report(std::ostream& out, const MetricReport& r) {
  out << "{\"n\": " << r.n << ", \"m_bins\": " << r.m_bins << ", \"ece1\": " << fmt(r.ece1)
      << ", \"ece2\": " << fmt(r.ece2) << ", \"brier\": " << fmt(r.brier) << ", \"nll\": " << fmt(r.nll) << "}\n";
}

// --- subcommands ---------------------------------------------------------------

struct MetricsArgs {
  LogOptions log;
  std::size_t bins = kDefaultBins;
  std::string agg = "pre_action";
  bool ensemble = false;
  std::size_t ensemble_size = 0;
  std::string out_dir;
};

void run_metrics(const MetricsArgs& a, std::ostream& out, std::ostream& err) {
  const auto episodes = load_log(a.log.path, a.log.lenient, err);
  const TrialAggregation agg = parse_trial_aggregation(a.agg);
  std::vector<ConfidenceSample> samples;
  samples.reserve(episodes.size());
  for (const auto& e : episodes) {
    samples.push_back(trial_confidence(e, agg, a.ensemble,
                                       a.ensemble_size > 0 ? std::optional<std::size_t>(a.ensemble_size) : std::nullopt));
  }
  const MetricReport report = metric_report(samples, a.bins);
  print_report(out, report);
  if (!a.out_dir.empty()) {
    auto m = open_output(a.out_dir, "metrics.csv");
    write_metrics_csv(m, report);
    auto r = open_output(a.out_dir, "reliability.csv");
    write_reliability_csv(r, equal_mass_bins(samples, a.bins));
  }
}

struct AblationArgs {
  LogOptions log;
  std::vector<std::size_t> k_list{1, 5, 10, 20};
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
  std::size_t bins = kDefaultBins;
  std::string out_dir;
};

void run_ablation(const AblationArgs& a, std::ostream& out, std::ostream& err) {
  const auto episodes = load_log(a.log.path, a.log.lenient, err);
  const auto rows = ensemble_ablation(episodes, a.k_list, a.trials, a.seed, a.bins);
  out << "k  mean_ece1  sd_ece1  mean_ece2  mean_brier  mean_nll\n";
  for (const auto& r : rows) {
    out << r.k << "  " << fmt(r.mean_ece1) << "  " << fmt(r.sd_ece1) << "  " << fmt(r.mean_ece2) << "  "
        << fmt(r.mean_brier) << "  " << fmt(r.mean_nll) << '\n';
  }
  if (!a.out_dir.empty()) {
    auto f = open_output(a.out_dir, "ablation.csv");
    write_ablation_csv(f, rows);
  }
}

struct RecalibrateArgs {
  LogOptions log;
  std::string method = "platt";
  std::string mode = "joint";
  std::string versus = "auto";
  double split = 0.2;
  std::size_t splits = 1000;
  std::uint64_t seed = 0;
  std::size_t bins = kDefaultBins;
  bool target_smoothing = false;
  std::string out_dir;
};

void run_recalibrate(const RecalibrateArgs& a, std::ostream& out, std::ostream& err) {
  const auto episodes = load_log(a.log.path, a.log.lenient, err);
  StudyConfig cfg;
  cfg.method = parse_recalibration_method(a.method);
  cfg.mode = parse_actionwise_mode(a.mode);
  cfg.calibration_fraction = a.split;
  cfg.splits = a.splits;
  cfg.seed = a.seed;
  cfg.m_bins = a.bins;
  cfg.fit.target_smoothing = a.target_smoothing;

  std::optional<RecalibrationMethod> versus;
  if (a.versus == "auto") {
    if (cfg.method == RecalibrationMethod::actionwise_platt) versus = RecalibrationMethod::platt;
    if (cfg.method == RecalibrationMethod::actionwise_temperature) versus = RecalibrationMethod::temperature;
  } else if (a.versus != "none") {
    versus = parse_recalibration_method(a.versus);
  }

  const StudyResult study = recalibration_study(episodes, cfg);
  const Recalibrator full = fit_on_all(episodes, cfg);

  std::optional<StudyResult> baseline;
  std::size_t wins = 0;
  if (versus) {
    StudyConfig vc = cfg;
    vc.method = *versus;
    baseline = recalibration_study(episodes, vc);
    for (std::size_t s = 0; s < study.splits.size(); ++s) {
      wins += study.splits[s].after.ece1 < baseline->splits[s].after.ece1;
    }
  }

  std::ostringstream summary;
  summary << "method: " << to_string(cfg.method);
  if (cfg.method == RecalibrationMethod::actionwise_platt) summary << " (" << to_string(cfg.mode) << ")";
  summary << "\nsplits: " << cfg.splits << " (calibration fraction " << fmt(cfg.calibration_fraction) << ", seed "
          << cfg.seed << ")\n";
  summary << "test ece1: " << fmt(study.mean_before.ece1) << " -> " << fmt(study.mean_after.ece1) << '\n';
  summary << "test ece2: " << fmt(study.mean_before.ece2) << " -> " << fmt(study.mean_after.ece2) << '\n';
  summary << "test brier: " << fmt(study.mean_before.brier) << " -> " << fmt(study.mean_after.brier) << '\n';
  summary << "test nll: " << fmt(study.mean_before.nll) << " -> " << fmt(study.mean_after.nll) << '\n';
  summary << "splits with lower ece1 than uncalibrated: " << study.improved_ece1 << '/' << cfg.splits << '\n';
  if (baseline) {
    summary << "versus " << to_string(*versus) << ": test ece1 " << fmt(baseline->mean_after.ece1) << " vs "
            << fmt(study.mean_after.ece1) << " (reduction " << fmt(baseline->mean_after.ece1 - study.mean_after.ece1)
            << "), lower in " << wins << '/' << cfg.splits << " splits\n";
  }
  out << summary.str();

  if (!a.out_dir.empty()) {
    auto r = open_output(a.out_dir, "recalibrator.txt");
    write_recalibrator(r, full);
    auto s = open_output(a.out_dir, "splits.csv");
    write_splits_csv(s, study);
    auto m = open_output(a.out_dir, "summary.txt");
    m << summary.str();
    if (baseline) {
      auto b = open_output(a.out_dir, "splits_versus.csv");
      write_splits_csv(b, *baseline);
    }
  }
}

struct TemporalArgs {
  LogOptions log;
  std::string agg = "current";
  std::size_t window = 5;
  std::size_t bins = kDefaultBins;
  std::vector<int> pcts{0, 50, 75, 99};
  std::string out_dir;
};

void run_temporal(const TemporalArgs& a, std::ostream& out, std::ostream& err) {
  const auto episodes = load_log(a.log.path, a.log.lenient, err);
  const TemporalAggregation agg = temporal_from(a.agg, a.window);
  const CompletionCurve curve = completion_curve(episodes, agg, a.bins);
  out << "completion_pct  ece1  brier  mean_conf_success  mean_conf_failure\n";
  for (int pct : a.pcts) {
    if (pct < 0 || pct >= kCompletionLevels) throw Error(ErrorCode::OutOfRange, "--pcts values must lie in 0..99");
    const auto& p = curve.points[static_cast<std::size_t>(pct)];
    out << pct << "  " << fmt(p.ece1) << "  " << fmt(p.brier) << "  "
        << (p.mean_conf_success ? fmt(*p.mean_conf_success) : "NA") << "  "
        << (p.mean_conf_failure ? fmt(*p.mean_conf_failure) : "NA") << '\n';
  }
  if (!a.out_dir.empty()) {
    auto c = open_output(a.out_dir, "curve.csv");
    write_curve_csv(c, curve);
    for (int pct : a.pcts) {
      auto r = open_output(a.out_dir, "reliability_pct" + std::to_string(pct) + ".csv");
      write_reliability_csv(r, reliability_at(episodes, pct, agg, a.bins));
    }
  }
}

struct MonitorArgs {
  LogOptions log;
  double quantile = 0.10;
  std::string agg = "current";
  std::size_t window = 5;
  bool loo = false;
  std::string profile;
  std::string out_dir;
};

void run_monitor(const MonitorArgs& a, std::ostream& out, std::ostream& err) {
  const auto episodes = load_log(a.log.path, a.log.lenient, err);
  const TemporalAggregation agg = temporal_from(a.agg, a.window);
  if (a.loo && !a.profile.empty()) throw Error(ErrorCode::InvalidArgument, "--loo cannot be combined with --profile");
  ThresholdProfile profile;
  if (!a.profile.empty()) {
    std::ifstream in(a.profile);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + a.profile + "'");
    profile = read_profile_csv(in, a.quantile);
  } else {
    profile = fit_thresholds(episodes, a.quantile, agg);
  }
  const MonitorReport report =
      a.loo ? monitor_report_leave_one_out(episodes, a.quantile, agg) : monitor_report(episodes, profile, agg);
  auto rate = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); };
  out << "episodes: " << episodes.size() << (a.loo ? " (leave-one-out thresholds)" : "") << '\n'
      << "halted and failed (intervention): " << report.halted_failed << '\n'
      << "halted and succeeded (false alarm): " << report.halted_succeeded << '\n'
      << "not halted and failed (miss): " << report.continued_failed << '\n'
      << "not halted and succeeded: " << report.continued_succeeded << '\n'
      << "halt rate: " << fmt(report.halt_rate) << '\n'
      << "halt rate among failures: " << rate(report.halt_rate_failures) << '\n'
      << "halt rate among successes: " << rate(report.halt_rate_successes) << '\n';
  if (!a.out_dir.empty()) {
    auto p = open_output(a.out_dir, "profile.csv");
    write_profile_csv(p, profile);
    auto d = open_output(a.out_dir, "decisions.csv");
    write_decisions_csv(d, episodes, report);
  }
}

struct SynthArgs {
  std::string preset_name;
  std::string config_path;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> variants;
  std::optional<double> prompt_noise_sd;
  std::string out_path;
  std::string truth_path;
};

void run_synth(const SynthArgs& a, std::ostream& out) {
  SynthConfig cfg;
  if (!a.config_path.empty()) {
    std::ifstream in(a.config_path);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + a.config_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    cfg = synth_config_from_json(buf.str());
  } else {
    cfg = preset(a.preset_name);
  }
  if (a.n) cfg.n_episodes = *a.n;
  if (a.seed) cfg.seed = *a.seed;
  if (a.variants) cfg.n_variants = *a.variants;
  if (a.prompt_noise_sd) cfg.prompt_noise_sd = *a.prompt_noise_sd;
  const SynthOutput data = generate(cfg);

  {
    std::ofstream log(a.out_path);
    if (!log) throw Error(ErrorCode::Io, "cannot write '" + a.out_path + "'");
    write_log(log, data.episodes);
  }
  const std::string truth_path = a.truth_path.empty() ? a.out_path + ".truth.json" : a.truth_path;
  {
    std::ofstream truth(truth_path);
    if (!truth) throw Error(ErrorCode::Io, "cannot write '" + truth_path + "'");
    write_ground_truth(truth, cfg, data.truth);
  }
  std::size_t successes = 0;
  for (const auto& e : data.episodes) successes += e.outcome;
  out << "episodes: " << data.episodes.size() << '\n'
      << "successes: " << successes << '\n'
      << "population success rate: " << fmt(data.truth.population_success_rate()) << '\n'
      << "log: " << a.out_path << '\n'
      << "ground truth: " << truth_path << '\n';
}

struct AuditArgs {
  LogOptions log;
  std::size_t bins = kDefaultBins;
  std::size_t t = 1;
  std::string out_dir;
};

void run_audit(const AuditArgs& a, std::ostream& out, std::ostream& err) {
  const auto episodes = load_log(a.log.path, a.log.lenient, err);
  const DimensionAudit audit = dimension_audit(dim_samples_at(episodes, a.t), a.bins);
  out << "dim  ece1  brier  nll  n\n";
  for (const auto& d : audit.per_dim) {
    out << d.dim_index << "  " << fmt(d.ece1) << "  " << fmt(d.brier) << "  " << fmt(d.nll) << "  " << d.n << '\n';
  }
  out << "ece1 max/min: " << fmt(audit.ece1_spread()) << '\n';
  if (!a.out_dir.empty()) {
    auto f = open_output(a.out_dir, "audit.csv");
    write_audit_csv(f, audit);
  }
}

struct CompareArgs {
  std::vector<std::string> paths;
  bool lenient = false;
  bool by_task = false;
  std::string agg = "pre_action";
  std::size_t bins = kDefaultBins;
  std::string out_dir;
};

void run_compare(const CompareArgs& a, std::ostream& out, std::ostream& err) {
  const TrialAggregation agg = parse_trial_aggregation(a.agg);
  std::vector<SampleGroup> groups;
  std::map<std::string, std::size_t> by_label;
  for (const auto& path : a.paths) {
    const auto episodes = load_log(path, a.lenient, err);
    if (!a.by_task) {
      SampleGroup g{fs::path(path).stem().string(), {}};
      for (const auto& e : episodes) g.samples.push_back(trial_confidence(e, agg));
      groups.push_back(std::move(g));
      continue;
    }
    for (const auto& e : episodes) {
      auto [it, inserted] = by_label.try_emplace(e.task_id, groups.size());
      if (inserted) groups.push_back({e.task_id, {}});
      groups[it->second].samples.push_back(trial_confidence(e, agg));
    }
  }
  const CompareTable table = success_vs_calibration_table(groups, a.bins);
  out << "group  n  task_error_rate  ece1  ece2  brier  nll\n";
  for (const auto& r : table.rows) {
    out << r.label << "  " << r.n << "  " << fmt(r.task_error_rate) << "  " << fmt(r.ece1) << "  " << fmt(r.ece2)
        << "  " << fmt(r.brier) << "  " << fmt(r.nll) << '\n';
  }
  auto value = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("not available"); };
  out << "spearman(task error, ece1): " << value(table.correlation.ece1) << '\n'
      << "spearman(task error, ece2): " << value(table.correlation.ece2) << '\n'
      << "spearman(task error, brier): " << value(table.correlation.brier) << '\n'
      << "spearman(task error, nll): " << value(table.correlation.nll) << '\n';
  if (!a.out_dir.empty()) {
    auto c = open_output(a.out_dir, "compare.csv");
    write_compare_csv(c, table);
    auto r = open_output(a.out_dir, "correlation.csv");
    write_correlation_csv(r, table.correlation);
  }
}

void add_log_options(CLI::App* cmd, LogOptions& log) {
  cmd->add_option("log", log.path, "Episode log (JSON lines)")->required();
  cmd->add_flag("--lenient", log.lenient, "Skip malformed records, reporting each on stderr");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Confidence calibration analysis for action-token policies", "calibkit"};
  app.require_subcommand(1);

  MetricsArgs metrics;
  auto* c_metrics = app.add_subcommand("metrics", "Calibration metrics of trial-level confidence");
  add_log_options(c_metrics, metrics.log);
  c_metrics->add_option("--bins", metrics.bins, "Equal-mass bins")->capture_default_str();
  c_metrics->add_option("--agg", metrics.agg, "pre_action, mean, min or max")->capture_default_str();
  c_metrics->add_flag("--ensemble", metrics.ensemble, "Average over prompt variants per timestep");
  c_metrics->add_option("--ensemble-size", metrics.ensemble_size, "Use the first k variants (default: all)");
  c_metrics->add_option("--out-dir", metrics.out_dir, "Write metrics.csv and reliability.csv here");

  AblationArgs ablation;
  auto* c_ablation = app.add_subcommand("ensemble-ablation", "Calibration against prompt-ensemble size");
  add_log_options(c_ablation, ablation.log);
  c_ablation->add_option("--k-list", ablation.k_list, "Ensemble sizes")->delimiter(',')->capture_default_str();
  c_ablation->add_option("--trials", ablation.trials, "Random subsets per size")->capture_default_str();
  c_ablation->add_option("--seed", ablation.seed)->capture_default_str();
  c_ablation->add_option("--bins", ablation.bins)->capture_default_str();
  c_ablation->add_option("--out-dir", ablation.out_dir, "Write ablation.csv here");

  RecalibrateArgs recal;
  auto* c_recal = app.add_subcommand("recalibrate", "Fit and evaluate a post hoc recalibrator");
  add_log_options(c_recal, recal.log);
  c_recal->add_option("--method", recal.method, "platt, temperature, aw-platt or aw-temp")->capture_default_str();
  c_recal->add_option("--mode", recal.mode, "aw-platt fitting: joint or independent")->capture_default_str();
  c_recal->add_option("--versus", recal.versus,
                      "Method compared on the same splits: auto, none, or a method name")
      ->capture_default_str();
  c_recal->add_option("--split", recal.split, "Calibration fraction")->capture_default_str();
  c_recal->add_option("--splits", recal.splits, "Random calibration/test splits")->capture_default_str();
  c_recal->add_option("--seed", recal.seed)->capture_default_str();
  c_recal->add_option("--bins", recal.bins)->capture_default_str();
  c_recal->add_flag("--target-smoothing", recal.target_smoothing, "Platt's smoothed regression targets");
  c_recal->add_option("--out-dir", recal.out_dir, "Write recalibrator.txt, splits.csv and summary.txt here");

  TemporalArgs temporal;
  auto* c_temporal = app.add_subcommand("temporal", "Calibration across task completion");
  add_log_options(c_temporal, temporal.log);
  c_temporal->add_option("--agg", temporal.agg, "current, window or avg_all")->capture_default_str();
  c_temporal->add_option("--window", temporal.window, "Window length for --agg window")->capture_default_str();
  c_temporal->add_option("--bins", temporal.bins)->capture_default_str();
  c_temporal->add_option("--pcts", temporal.pcts, "Completion levels for reliability diagrams")
      ->delimiter(',')
      ->capture_default_str();
  c_temporal->add_option("--out-dir", temporal.out_dir, "Write curve.csv and reliability_pct*.csv here");

  MonitorArgs monitor;
  auto* c_monitor = app.add_subcommand("monitor", "Quantile-threshold halting monitor");
  add_log_options(c_monitor, monitor.log);
  c_monitor->add_option("--quantile", monitor.quantile)->capture_default_str();
  c_monitor->add_option("--agg", monitor.agg, "current, window or avg_all")->capture_default_str();
  c_monitor->add_option("--window", monitor.window)->capture_default_str();
  c_monitor->add_flag("--loo", monitor.loo, "Judge each episode with thresholds fitted on the others");
  c_monitor->add_option("--profile", monitor.profile, "Use thresholds from this CSV instead of fitting");
  c_monitor->add_option("--out-dir", monitor.out_dir, "Write profile.csv and decisions.csv here");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic episode log with ground truth");
  auto* o_preset = c_synth->add_option("--preset", synth.preset_name, "perfect, overconfident, hetero7, "
                                                                       "discriminative or sharpening");
  auto* o_config = c_synth->add_option("--config", synth.config_path, "JSON generator configuration");
  o_preset->excludes(o_config);
  c_synth->add_option("--n", synth.n, "Number of episodes");
  c_synth->add_option("--seed", synth.seed);
  c_synth->add_option("--variants", synth.variants, "Prompt variants per episode");
  c_synth->add_option("--prompt-noise-sd", synth.prompt_noise_sd);
  c_synth->add_option("--out", synth.out_path, "Episode log to write")->required();
  c_synth->add_option("--truth", synth.truth_path, "Ground-truth sidecar (default: <out>.truth.json)");

  AuditArgs audit;
  auto* c_audit = app.add_subcommand("audit", "Per-dimension calibration audit");
  add_log_options(c_audit, audit.log);
  c_audit->add_option("--bins", audit.bins)->capture_default_str();
  c_audit->add_option("--t", audit.t, "Timestep to audit")->capture_default_str();
  c_audit->add_option("--out-dir", audit.out_dir, "Write audit.csv here");

  CompareArgs compare;
  auto* c_compare = app.add_subcommand("compare", "Task error against calibration across groups");
  c_compare->add_option("logs", compare.paths, "Episode logs, one group each")->required();
  c_compare->add_flag("--lenient", compare.lenient);
  c_compare->add_flag("--by-task", compare.by_task, "Group by task_id instead of by file");
  c_compare->add_option("--agg", compare.agg)->capture_default_str();
  c_compare->add_option("--bins", compare.bins)->capture_default_str();
  c_compare->add_option("--out-dir", compare.out_dir, "Write compare.csv and correlation.csv here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (c_metrics->parsed()) run_metrics(metrics, out, err);
    else if (c_ablation->parsed()) run_ablation(ablation, out, err);
    else if (c_recal->parsed()) run_recalibrate(recal, out, err);
    else if (c_temporal->parsed()) run_temporal(temporal, out, err);
    else if (c_monitor->parsed()) run_monitor(monitor, out, err);
    else if (c_synth->parsed()) {
      if (synth.preset_name.empty() && synth.config_path.empty()) {
        err << "usage error: synth needs --preset or --config\n";
        return 2;
      }
      run_synth(synth, out);
    } else if (c_audit->parsed()) run_audit(audit, out, err);
    else if (c_compare->parsed()) run_compare(compare, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_validation_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace calibkit
