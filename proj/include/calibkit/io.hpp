#pragma once

// Episode-log ingestion and every on-disk format: JSON-lines episode logs,
// the recalibrator text format, threshold profiles, synth sidecars and the
// report CSVs.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "calibkit/audit.hpp"
#include "calibkit/core.hpp"
#include "calibkit/metrics.hpp"
#include "calibkit/monitor.hpp"
#include "calibkit/protocols.hpp"
#include "calibkit/synth.hpp"
#include "calibkit/temporal.hpp"

namespace calibkit {

inline constexpr int kSchemaVersion = 1;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
/// Strict inverse of format_double; throws InvalidArgument on junk.
double parse_double(std::string_view text);

// --- episode logs -------------------------------------------------------------

struct ParseIssue {
  std::size_t line = 0;
  std::string path;
  std::string cause;
};

struct ParseResult {
  std::vector<EpisodeRecord> episodes;
  std::vector<ParseIssue> issues;
};

/// Parses one JSON record (the text of line `line`). Throws ParseError, or
/// Error(SchemaVersionUnsupported) for a schema_version other than 1.
EpisodeRecord parse_episode(std::string_view text, std::size_t line);

/// Strict: stops at the first bad line. Blank lines are skipped.
std::vector<EpisodeRecord> parse_log(std::istream& in);
/// Lenient: keeps every valid record and collects one issue per bad line.
ParseResult parse_log_lenient(std::istream& in);
std::vector<EpisodeRecord> read_log_file(const std::filesystem::path& path);

std::string episode_to_json(const EpisodeRecord& episode);
void write_log(std::ostream& out, std::span<const EpisodeRecord> episodes);
void write_log_file(const std::filesystem::path& path, std::span<const EpisodeRecord> episodes);

// --- recalibrators ------------------------------------------------------------

void write_recalibrator(std::ostream& out, const Recalibrator& r);
Recalibrator read_recalibrator(std::istream& in);

// --- threshold profiles ------------------------------------------------------------

/// Header `completion_pct,threshold` then rows 0..99.
void write_profile_csv(std::ostream& out, const ThresholdProfile& profile);
ThresholdProfile read_profile_csv(std::istream& in, double quantile_level = 0.1);

// --- synth configuration and ground truth ------------------------------------

/// Missing keys keep their SynthConfig defaults; unknown keys are rejected.
SynthConfig synth_config_from_json(std::string_view text);
std::string synth_config_to_json(const SynthConfig& config);
void write_ground_truth(std::ostream& out, const SynthConfig& config, const GroundTruth& truth);

// --- report CSVs ---------------------------------------------------------------

void write_metrics_csv(std::ostream& out, const MetricReport& r);
void write_reliability_csv(std::ostream& out, const BinnedDiagram& d);
void write_curve_csv(std::ostream& out, const CompletionCurve& curve);
void write_decisions_csv(std::ostream& out, std::span<const EpisodeRecord> episodes, const MonitorReport& report);
void write_audit_csv(std::ostream& out, const DimensionAudit& audit);
void write_compare_csv(std::ostream& out, const CompareTable& table);
void write_correlation_csv(std::ostream& out, const RankCorrelations& c);
void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows);
void write_splits_csv(std::ostream& out, const StudyResult& study);

}  // namespace calibkit
