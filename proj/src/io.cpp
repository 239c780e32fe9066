#include "calibkit/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <istream>
#include <ostream>
#include <sstream>
#include <system_error>

#include "json.hpp"

namespace calibkit {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::InvalidArgument, "not a number: '" + std::string(text) + "'");
  }
  return v;
}

// --- episode logs -------------------------------------------------------------

namespace {

class RecordReader {
 public:
  explicit RecordReader(std::size_t line) : line_(line) {}

  [[noreturn]] void fail(const std::string& path, const std::string& cause) const {
    throw ParseError(line_, path.empty() ? "<record>" : path, cause);
  }

  const json& field(const json& obj, const char* key, const std::string& path) const {
    const auto it = obj.find(key);
    if (it == obj.end()) fail(join(path, key), "missing field");
    return *it;
  }

  static std::string join(const std::string& path, const char* key) {
    return path.empty() ? std::string(key) : path + "." + key;
  }
  static std::string index(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
  }

  double number(const json& v, const std::string& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path, "value is not finite");
    return x;
  }

  long long integer(const json& v, const std::string& path) const {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<long long>();
  }

  std::string string(const json& v, const std::string& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

  const json& array(const json& v, const std::string& path) const {
    if (!v.is_array()) fail(path, "expected an array");
    return v;
  }

  const json& object(const json& v, const std::string& path) const {
    if (!v.is_object()) fail(path, "expected an object");
    return v;
  }

  DimensionStep dim(const json& v, const std::string& path) const {
    object(v, path);
    DimensionStep d;
    const std::string tp = join(path, "top_prob");
    d.top_prob = number(field(v, "top_prob", path), tp);
    if (d.top_prob < 0.0 || d.top_prob > 1.0) fail(tp, "probability outside [0,1]");
    if (const auto it = v.find("chosen_token"); it != v.end()) {
      const long long c = integer(*it, join(path, "chosen_token"));
      if (c < 0 || c > std::numeric_limits<int>::max()) fail(join(path, "chosen_token"), "token index out of range");
      d.chosen_token = static_cast<int>(c);
    }
    if (const auto it = v.find("logits"); it != v.end()) {
      const std::string lp = join(path, "logits");
      array(*it, lp);
      std::vector<double> z;
      z.reserve(it->size());
      for (std::size_t k = 0; k < it->size(); ++k) z.push_back(number((*it)[k], index(lp, k)));
      d.logits = std::move(z);
    }
    try {
      validate(d);
    } catch (const Error& e) {
      fail(d.logits ? join(path, "logits") : path, e.what());
    }
    return d;
  }

  EpisodeRecord episode(const json& doc) const {
    object(doc, "");
    const json& version = field(doc, "schema_version", "");
    const long long sv = integer(version, "schema_version");
    if (sv != kSchemaVersion) {
      throw Error(ErrorCode::SchemaVersionUnsupported,
                  "line " + std::to_string(line_) + ": schema_version " + std::to_string(sv) + " (supported: 1)");
    }
    EpisodeRecord e;
    e.episode_id = string(field(doc, "episode_id", ""), "episode_id");
    e.task_id = string(field(doc, "task_id", ""), "task_id");
    const long long outcome = integer(field(doc, "outcome", ""), "outcome");
    if (outcome != 0 && outcome != 1) fail("outcome", "outcome must be 0 or 1");
    e.outcome = static_cast<int>(outcome);

    const json& variants = array(field(doc, "variants", ""), "variants");
    if (variants.empty()) fail("variants", "at least one variant is required");
    std::optional<std::size_t> dims;
    bool has_canonical = false;
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
      const std::string vp = index("variants", vi);
      const json& vj = object(variants[vi], vp);
      VariantTrajectory v;
      const long long id = integer(field(vj, "variant_id", vp), join(vp, "variant_id"));
      if (id < 0 || id > std::numeric_limits<int>::max()) fail(join(vp, "variant_id"), "variant_id out of range");
      v.variant_id = static_cast<int>(id);
      for (const auto& prev : e.variants) {
        if (prev.variant_id == v.variant_id) fail(join(vp, "variant_id"), "duplicate variant_id");
      }
      has_canonical |= v.variant_id == 0;
      if (const auto it = vj.find("instruction_text"); it != vj.end()) {
        v.instruction_text = string(*it, join(vp, "instruction_text"));
      }
      const std::string sp = join(vp, "steps");
      const json& steps = array(field(vj, "steps", vp), sp);
      if (steps.empty()) fail(sp, "at least one step is required");
      for (std::size_t si = 0; si < steps.size(); ++si) {
        const std::string tp = index(sp, si);
        const json& sj = object(steps[si], tp);
        TimestepRecord step;
        const long long t = integer(field(sj, "t", tp), join(tp, "t"));
        if (t != static_cast<long long>(si + 1)) {
          fail(join(tp, "t"), "non-contiguous t: expected " + std::to_string(si + 1) + ", got " + std::to_string(t));
        }
        step.t = si + 1;
        if (const auto it = sj.find("proximity"); it != sj.end()) {
          if (!it->is_boolean()) fail(join(tp, "proximity"), "expected a boolean");
          step.proximity = it->get<bool>();
        }
        const std::string dp = join(tp, "dims");
        const json& dj = array(field(sj, "dims", tp), dp);
        if (dj.empty()) fail(dp, "at least one dimension is required");
        if (dims && *dims != dj.size()) {
          fail(dp, "ragged D: expected " + std::to_string(*dims) + ", got " + std::to_string(dj.size()));
        }
        dims = dj.size();
        for (std::size_t di = 0; di < dj.size(); ++di) step.dims.push_back(dim(dj[di], index(dp, di)));
        v.steps.push_back(std::move(step));
      }
      e.variants.push_back(std::move(v));
    }
    if (!has_canonical) fail("variants", "variant_id 0 is required");
    try {
      validate(e);
    } catch (const Error& err) {
      fail("", err.what());
    }
    return e;
  }

 private:
  std::size_t line_;
};

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

}  // namespace

EpisodeRecord parse_episode(std::string_view text, std::size_t line) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(line, "<record>", std::string("malformed JSON: ") + e.what());
  }
  return RecordReader(line).episode(doc);
}

std::vector<EpisodeRecord> parse_log(std::istream& in) {
  std::vector<EpisodeRecord> out;
  std::string text;
  for (std::size_t line = 1; std::getline(in, text); ++line) {
    if (blank(text)) continue;
    out.push_back(parse_episode(text, line));
  }
  if (in.bad()) throw Error(ErrorCode::Io, "read failure");
  return out;
}

ParseResult parse_log_lenient(std::istream& in) {
  ParseResult out;
  std::string text;
  for (std::size_t line = 1; std::getline(in, text); ++line) {
    if (blank(text)) continue;
    try {
      out.episodes.push_back(parse_episode(text, line));
    } catch (const ParseError& e) {
      out.issues.push_back({e.line(), e.path(), e.cause()});
    } catch (const Error& e) {
      out.issues.push_back({line, "schema_version", e.what()});
    }
  }
  if (in.bad()) throw Error(ErrorCode::Io, "read failure");
  return out;
}

std::vector<EpisodeRecord> read_log_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  return parse_log(in);
}

std::string episode_to_json(const EpisodeRecord& e) {
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["episode_id"] = e.episode_id;
  doc["task_id"] = e.task_id;
  doc["outcome"] = e.outcome;
  ordered_json variants = ordered_json::array();
  for (const auto& v : e.variants) {
    ordered_json vj;
    vj["variant_id"] = v.variant_id;
    vj["instruction_text"] = v.instruction_text;
    ordered_json steps = ordered_json::array();
    for (const auto& s : v.steps) {
      ordered_json sj;
      sj["t"] = s.t;
      sj["proximity"] = s.proximity;
      ordered_json dims = ordered_json::array();
      for (const auto& d : s.dims) {
        ordered_json dj;
        dj["top_prob"] = d.top_prob;
        if (d.chosen_token) dj["chosen_token"] = *d.chosen_token;
        if (d.logits) dj["logits"] = *d.logits;
        dims.push_back(std::move(dj));
      }
      sj["dims"] = std::move(dims);
      steps.push_back(std::move(sj));
    }
    vj["steps"] = std::move(steps);
    variants.push_back(std::move(vj));
  }
  doc["variants"] = std::move(variants);
  return doc.dump();
}

void write_log(std::ostream& out, std::span<const EpisodeRecord> episodes) {
  for (const auto& e : episodes) out << episode_to_json(e) << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failure");
}

void write_log_file(const std::filesystem::path& path, std::span<const EpisodeRecord> episodes) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  write_log(out, episodes);
}

// --- recalibrators ------------------------------------------------------------

namespace {

constexpr std::string_view kRecalibratorMagic = "calibkit-recalibrator 1";

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::InvalidArgument, "not an unsigned integer: '" + s + "'");
  }
  return v;
}

}  // namespace

void write_recalibrator(std::ostream& out, const Recalibrator& r) {
  validate(r);
  out << kRecalibratorMagic << '\n';
  out << "kind " << to_string(r.kind) << '\n';
  out << "dimension " << r.dimension() << '\n';
  out << "n " << r.meta.n << '\n';
  out << "seed " << r.meta.seed << '\n';
  out << "converged " << (r.meta.converged ? 1 : 0) << '\n';
  out << "iterations " << r.meta.iterations << '\n';
  for (std::size_t d = 0; d < r.platt.size(); ++d) {
    out << "platt " << d << ' ' << format_double(r.platt[d].alpha) << ' ' << format_double(r.platt[d].beta) << '\n';
  }
  for (std::size_t d = 0; d < r.temperatures.size(); ++d) {
    out << "temperature " << d << ' ' << format_double(r.temperatures[d]) << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failure");
}

Recalibrator read_recalibrator(std::istream& in) {
  std::string text;
  std::size_t line = 0;
  auto next = [&](const char* expected) {
    if (!std::getline(in, text)) throw ParseError(line + 1, expected, "unexpected end of input");
    ++line;
    auto toks = split_ws(text);
    if (toks.empty() || toks[0] != expected) throw ParseError(line, expected, "expected '" + std::string(expected) + "'");
    return toks;
  };
  auto guarded = [&](const char* key, auto&& fn) {
    try {
      return fn();
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line, key, e.what());
    }
  };

  if (!std::getline(in, text)) throw ParseError(1, "header", "empty input");
  line = 1;
  if (!text.empty() && text.back() == '\r') text.pop_back();
  if (text != kRecalibratorMagic) throw ParseError(1, "header", "expected '" + std::string(kRecalibratorMagic) + "'");

  Recalibrator r;
  auto toks = next("kind");
  if (toks.size() != 2) throw ParseError(line, "kind", "expected one value");
  r.kind = guarded("kind", [&] { return parse_recalibrator_kind(toks[1]); });
  toks = next("dimension");
  const std::size_t dims = guarded("dimension", [&] { return parse_u64(toks.at(1)); });
  toks = next("n");
  r.meta.n = guarded("n", [&] { return parse_u64(toks.at(1)); });
  toks = next("seed");
  r.meta.seed = guarded("seed", [&] { return parse_u64(toks.at(1)); });
  toks = next("converged");
  r.meta.converged = guarded("converged", [&] { return parse_u64(toks.at(1)) != 0; });
  toks = next("iterations");
  r.meta.iterations = static_cast<int>(guarded("iterations", [&] { return parse_u64(toks.at(1)); }));

  const bool platt = r.kind == RecalibratorKind::platt || r.kind == RecalibratorKind::actionwise_platt;
  for (std::size_t d = 0; d < dims; ++d) {
    if (platt) {
      toks = next("platt");
      if (toks.size() != 4) throw ParseError(line, "platt", "expected index, alpha, beta");
      if (guarded("platt", [&] { return parse_u64(toks[1]); }) != d) throw ParseError(line, "platt", "index out of order");
      r.platt.push_back({guarded("platt", [&] { return parse_double(toks[2]); }),
                         guarded("platt", [&] { return parse_double(toks[3]); })});
    } else {
      toks = next("temperature");
      if (toks.size() != 3) throw ParseError(line, "temperature", "expected index, value");
      if (guarded("temperature", [&] { return parse_u64(toks[1]); }) != d) {
        throw ParseError(line, "temperature", "index out of order");
      }
      r.temperatures.push_back(guarded("temperature", [&] { return parse_double(toks[2]); }));
    }
  }
  try {
    validate(r);
  } catch (const Error& e) {
    throw ParseError(line, "parameters", e.what());
  }
  return r;
}

// --- threshold profiles ------------------------------------------------------------

void write_profile_csv(std::ostream& out, const ThresholdProfile& profile) {
  out << "completion_pct,threshold\n";
  for (const auto& [pct, threshold] : profile.thresholds) out << pct << ',' << format_double(threshold) << '\n';
}

ThresholdProfile read_profile_csv(std::istream& in, double quantile_level) {
  ThresholdProfile p;
  p.quantile_level = quantile_level;
  std::string text;
  std::size_t line = 0;
  if (!std::getline(in, text)) throw ParseError(1, "header", "empty input");
  ++line;
  if (!text.empty() && text.back() == '\r') text.pop_back();
  if (text != "completion_pct,threshold") throw ParseError(1, "header", "expected 'completion_pct,threshold'");
  while (std::getline(in, text)) {
    ++line;
    if (blank(text)) continue;
    if (text.back() == '\r') text.pop_back();
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw ParseError(line, "row", "expected two columns");
    try {
      const auto pct = static_cast<int>(parse_u64(text.substr(0, comma)));
      if (pct >= kCompletionLevels) throw Error(ErrorCode::OutOfRange, "completion_pct outside 0..99");
      const double v = parse_double(std::string_view(text).substr(comma + 1));
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "threshold is not finite");
      p.thresholds[pct] = v;
    } catch (const Error& e) {
      throw ParseError(line, "row", e.what());
    }
  }
  return p;
}

// --- synth configuration and ground truth ------------------------------------

namespace {

[[noreturn]] void bad_config(const std::string& what) { throw Error(ErrorCode::BadConfig, what); }

template <class T>
T get_as(const json& v, const char* key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    bad_config(std::string("field '") + key + "' has the wrong type");
  }
}

std::size_t get_count(const json& v, const char* key) {
  if (!v.is_number_integer() || v.get<long long>() < 0) bad_config(std::string("field '") + key + "' must be a count");
  return v.get<std::size_t>();
}

}  // namespace

SynthConfig synth_config_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    bad_config(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) bad_config("config must be a JSON object");
  SynthConfig c;
  if (const auto it = doc.find("preset"); it != doc.end()) c = preset(get_as<std::string>(*it, "preset"));
  bool profiles_given = false;
  for (const auto& [key, v] : doc.items()) {
    const char* k = key.c_str();
    if (key == "preset") continue;
    if (key == "n_episodes") c.n_episodes = get_count(v, k);
    else if (key == "dims") c.dims = get_count(v, k);
    else if (key == "vocab") c.vocab = get_count(v, k);
    else if (key == "t_min") c.t_min = get_count(v, k);
    else if (key == "t_max") c.t_max = get_count(v, k);
    else if (key == "n_variants") c.n_variants = get_count(v, k);
    else if (key == "prompt_noise_sd") c.prompt_noise_sd = get_as<double>(v, k);
    else if (key == "prompt_noise_shared") c.prompt_noise_shared = get_as<double>(v, k);
    else if (key == "temporal_profile") c.temporal_profile = parse_temporal_profile(get_as<std::string>(v, k));
    else if (key == "tracking_bias") c.tracking_bias = get_as<double>(v, k);
    else if (key == "tracking_noise_sd") c.tracking_noise_sd = get_as<double>(v, k);
    else if (key == "tracking_persistence") c.tracking_persistence = get_as<double>(v, k);
    else if (key == "outcome_drift") c.outcome_drift = get_as<double>(v, k);
    else if (key == "proximity_start_pct") c.proximity_start_pct = get_as<double>(v, k);
    else if (key == "logits") c.logits = parse_logit_emission(get_as<std::string>(v, k));
    else if (key == "logit_sharpening") c.logit_sharpening = get_as<double>(v, k);
    else if (key == "seed") c.seed = get_as<std::uint64_t>(v, k);
    else if (key == "dim_profiles") {
      if (!v.is_array()) bad_config("dim_profiles must be an array");
      c.dim_profiles.clear();
      for (const auto& p : v) {
        if (!p.is_object()) bad_config("dim_profiles entries must be objects");
        DimProfile d;
        d.lo = get_as<double>(p.value("lo", json(d.lo)), "lo");
        d.hi = get_as<double>(p.value("hi", json(d.hi)), "hi");
        d.rho = get_as<double>(p.value("rho", json(d.rho)), "rho");
        c.dim_profiles.push_back(d);
      }
      profiles_given = true;
    } else if (key == "link") {
      if (!v.is_object()) bad_config("link must be an object");
      c.link = SuccessLink{};
      c.link.kind = parse_success_link_kind(get_as<std::string>(v.value("kind", json("identity")), "kind"));
      if (v.contains("a")) c.link.platt.alpha = get_as<double>(v["a"], "a");
      if (v.contains("b")) c.link.platt.beta = get_as<double>(v["b"], "b");
      if (v.contains("per_dim")) {
        for (const auto& ab : v["per_dim"]) {
          if (!ab.is_array() || ab.size() != 2) bad_config("per_dim entries must be [a, b] pairs");
          c.link.per_dim.push_back({get_as<double>(ab[0], "a"), get_as<double>(ab[1], "b")});
        }
      }
    } else {
      bad_config("unknown config key '" + key + "'");
    }
  }
  // A single profile (or none given after changing D) is broadcast to every dimension.
  if (c.dim_profiles.size() == 1 && c.dims > 1) c.dim_profiles.assign(c.dims, c.dim_profiles.front());
  if (!profiles_given && c.dim_profiles.size() != c.dims && !c.dim_profiles.empty()) {
    c.dim_profiles.assign(c.dims, c.dim_profiles.front());
  }
  validate(c);
  return c;
}

namespace {

ordered_json config_json(const SynthConfig& c) {
  ordered_json j;
  j["n_episodes"] = c.n_episodes;
  j["dims"] = c.dims;
  j["vocab"] = c.vocab;
  j["t_min"] = c.t_min;
  j["t_max"] = c.t_max;
  ordered_json link;
  link["kind"] = std::string(to_string(c.link.kind));
  link["a"] = c.link.platt.alpha;
  link["b"] = c.link.platt.beta;
  ordered_json per_dim = ordered_json::array();
  for (const auto& p : c.link.per_dim) per_dim.push_back({p.alpha, p.beta});
  link["per_dim"] = per_dim;
  j["link"] = link;
  ordered_json profiles = ordered_json::array();
  for (const auto& p : c.dim_profiles) profiles.push_back({{"lo", p.lo}, {"hi", p.hi}, {"rho", p.rho}});
  j["dim_profiles"] = profiles;
  j["n_variants"] = c.n_variants;
  j["prompt_noise_sd"] = c.prompt_noise_sd;
  j["prompt_noise_shared"] = c.prompt_noise_shared;
  j["temporal_profile"] = std::string(to_string(c.temporal_profile));
  j["tracking_bias"] = c.tracking_bias;
  j["tracking_noise_sd"] = c.tracking_noise_sd;
  j["tracking_persistence"] = c.tracking_persistence;
  j["outcome_drift"] = c.outcome_drift;
  j["proximity_start_pct"] = c.proximity_start_pct;
  j["logits"] = std::string(to_string(c.logits));
  j["logit_sharpening"] = c.logit_sharpening;
  j["seed"] = c.seed;
  return j;
}

}  // namespace

std::string synth_config_to_json(const SynthConfig& config) { return config_json(config).dump(2); }

void write_ground_truth(std::ostream& out, const SynthConfig& config, const GroundTruth& truth) {
  ordered_json doc;
  doc["seed"] = truth.seed;
  doc["config"] = config_json(config);
  doc["population_success_rate"] = truth.population_success_rate();
  ordered_json eps = ordered_json::array();
  for (const auto& e : truth.episodes) {
    ordered_json ej;
    ej["episode_id"] = e.episode_id;
    ej["latent"] = e.latent;
    ej["clean_confidence"] = e.clean_confidence;
    ej["success_probability"] = e.success_probability;
    ej["horizon"] = e.horizon;
    eps.push_back(std::move(ej));
  }
  doc["episodes"] = std::move(eps);
  out << doc.dump() << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failure");
}

// --- report CSVs ---------------------------------------------------------------

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

/// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace

void write_metrics_csv(std::ostream& out, const MetricReport& r) {
  out << "n,m_bins,ece1,ece2,brier,nll\n"
      << r.n << ',' << r.m_bins << ',' << format_double(r.ece1) << ',' << format_double(r.ece2) << ','
      << format_double(r.brier) << ',' << format_double(r.nll) << '\n';
}

void write_reliability_csv(std::ostream& out, const BinnedDiagram& d) {
  out << "bin_index,count,mean_confidence,mean_accuracy\n";
  for (std::size_t j = 0; j < d.bins.size(); ++j) {
    out << j << ',' << d.bins[j].count << ',' << format_double(d.bins[j].mean_confidence) << ','
        << format_double(d.bins[j].mean_accuracy) << '\n';
  }
}

void write_curve_csv(std::ostream& out, const CompletionCurve& curve) {
  out << "completion_pct,ece1,brier,n,mean_conf_success,mean_conf_failure\n";
  for (const auto& p : curve.points) {
    out << p.completion_pct << ',' << format_double(p.ece1) << ',' << format_double(p.brier) << ',' << p.n << ','
        << opt(p.mean_conf_success) << ',' << opt(p.mean_conf_failure) << '\n';
  }
}

void write_decisions_csv(std::ostream& out, std::span<const EpisodeRecord> episodes, const MonitorReport& report) {
  out << "episode_id,outcome,halted,halt_timestep,halt_pct,reason\n";
  for (std::size_t i = 0; i < report.decisions.size(); ++i) {
    const auto& d = report.decisions[i];
    out << csv_field(d.episode_id) << ',' << episodes[i].outcome << ',' << (d.halted ? 1 : 0) << ','
        << (d.halt_timestep ? std::to_string(*d.halt_timestep) : "") << ','
        << (d.halt_pct ? std::to_string(*d.halt_pct) : "") << ',' << to_string(d.reason) << '\n';
  }
}

void write_audit_csv(std::ostream& out, const DimensionAudit& audit) {
  out << "dim_index,ece1,brier,nll,n\n";
  for (const auto& d : audit.per_dim) {
    out << d.dim_index << ',' << format_double(d.ece1) << ',' << format_double(d.brier) << ','
        << format_double(d.nll) << ',' << d.n << '\n';
  }
}

void write_compare_csv(std::ostream& out, const CompareTable& table) {
  out << "label,n,task_error_rate,ece1,ece2,brier,nll\n";
  for (const auto& r : table.rows) {
    out << csv_field(r.label) << ',' << r.n << ',' << format_double(r.task_error_rate) << ','
        << format_double(r.ece1) << ',' << format_double(r.ece2) << ',' << format_double(r.brier) << ','
        << format_double(r.nll) << '\n';
  }
}

void write_correlation_csv(std::ostream& out, const RankCorrelations& c) {
  auto value = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); };
  out << "metric,spearman_vs_task_error\n"
      << "ece1," << value(c.ece1) << '\n'
      << "ece2," << value(c.ece2) << '\n'
      << "brier," << value(c.brier) << '\n'
      << "nll," << value(c.nll) << '\n';
}

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows) {
  out << "k,trials,mean_ece1,sd_ece1,mean_ece2,mean_brier,mean_nll\n";
  for (const auto& r : rows) {
    out << r.k << ',' << r.trials << ',' << format_double(r.mean_ece1) << ',' << format_double(r.sd_ece1) << ','
        << format_double(r.mean_ece2) << ',' << format_double(r.mean_brier) << ',' << format_double(r.mean_nll)
        << '\n';
  }
}

void write_splits_csv(std::ostream& out, const StudyResult& study) {
  out << "split,seed,n_calibration,n_test,ece1_before,ece1_after,ece2_before,ece2_after,"
         "brier_before,brier_after,nll_before,nll_after,converged\n";
  for (const auto& s : study.splits) {
    out << s.split << ',' << s.seed << ',' << s.n_calibration << ',' << s.n_test << ','
        << format_double(s.before.ece1) << ',' << format_double(s.after.ece1) << ','
        << format_double(s.before.ece2) << ',' << format_double(s.after.ece2) << ','
        << format_double(s.before.brier) << ',' << format_double(s.after.brier) << ','
        << format_double(s.before.nll) << ',' << format_double(s.after.nll) << ',' << (s.converged ? 1 : 0) << '\n';
  }
}

}  // namespace calibkit
