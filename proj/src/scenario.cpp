#include "qnode/scenario.hpp"

#include <algorithm>
#include <cerrno>
#include <climits>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace qnode {

MzParams ScenarioAnalyzer::to_mz() const {
  return MzParams{delay, phase_over_pi * std::numbers::pi, t_short, t_long};
}

std::string to_string(AnalysisMode mode) {
  switch (mode) {
    case AnalysisMode::bare:
      return "bare";
    case AnalysisMode::franson:
      return "franson";
    case AnalysisMode::heralded_g2:
      return "heralded-g2";
  }
  return "bare";
}

AnalysisMode analysis_mode_from_string(const std::string& name) {
  if (name == "bare") return AnalysisMode::bare;
  if (name == "franson") return AnalysisMode::franson;
  if (name == "heralded-g2") return AnalysisMode::heralded_g2;
  throw std::invalid_argument(
      "analysis.mode must be 'bare', 'franson', or 'heralded-g2', got '" +
      name + "'");
}

namespace {

// Rethrows sub-validator errors with the generic section prefix replaced by
// the concrete field path (e.g. "detector." -> "detector_idler.").
template <typename Fn>
void validate_as(const char* generic, const std::string& actual, Fn&& fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    if (msg.rfind(generic, 0) == 0)
      msg = actual + msg.substr(std::string(generic).size());
    throw std::invalid_argument(msg);
  }
}

size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string suggest(std::string_view got,
                    const std::vector<std::string>& known) {
  size_t best = SIZE_MAX;
  std::string pick;
  for (const auto& k : known) {
    size_t d = edit_distance(got, k);
    if (d < best) {
      best = d;
      pick = k;
    }
  }
  if (!pick.empty() && best <= std::max<size_t>(2, got.size() / 3))
    return "; did you mean '" + pick + "'?";
  return "";
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt_double(v[i]);
  }
  return out;
}

struct KeyDef {
  std::string name;
  std::string doc;
  std::function<void(Scenario&, const std::string&)> set;  // throws on bad value
  std::function<std::string(const Scenario&)> get;
};

struct SectionDef {
  std::string name;
  std::vector<KeyDef> keys;
};

double parse_double(const std::string& v) {
  errno = 0;
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0' || errno == ERANGE ||
      !std::isfinite(x))
    throw std::invalid_argument("expected a finite number, got '" + v + "'");
  return x;
}

std::uint64_t parse_u64(const std::string& v) {
  errno = 0;
  char* end = nullptr;
  unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0' || errno == ERANGE ||
      v.find('-') != std::string::npos)
    throw std::invalid_argument("expected an unsigned integer, got '" + v +
                                "'");
  return x;
}

int parse_int(const std::string& v) {
  errno = 0;
  char* end = nullptr;
  long x = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0' || errno == ERANGE || x < INT_MIN ||
      x > INT_MAX)
    throw std::invalid_argument("expected an integer, got '" + v + "'");
  return static_cast<int>(x);
}

std::vector<double> parse_list(const std::string& v) {
  std::vector<double> out;
  std::string item;
  std::istringstream is(v);
  while (std::getline(is, item, ',')) {
    size_t b = item.find_first_not_of(" \t");
    size_t e = item.find_last_not_of(" \t");
    if (b == std::string::npos)
      throw std::invalid_argument("empty entry in list '" + v + "'");
    out.push_back(parse_double(item.substr(b, e - b + 1)));
  }
  if (out.empty()) throw std::invalid_argument("expected a list of numbers");
  return out;
}

KeyDef num_key(std::string name, std::string doc,
               std::function<double&(Scenario&)> ref) {
  return KeyDef{
      std::move(name), std::move(doc),
      [ref](Scenario& s, const std::string& v) { ref(s) = parse_double(v); },
      [ref](const Scenario& s) {
        return fmt_double(ref(const_cast<Scenario&>(s)));
      }};
}

std::vector<SectionDef> schema() {
  std::vector<SectionDef> out;

  SectionDef source{"source", {}};
  source.keys.push_back(num_key(
      "pair_rate", "detected-band photon pairs per second",
      [](Scenario& s) -> double& { return s.source.pair_rate; }));
  source.keys.push_back(num_key(
      "correlation_time",
      "double-exponential signal-idler arrival spread, seconds",
      [](Scenario& s) -> double& { return s.source.correlation_time; }));
  source.keys.push_back(num_key(
      "pump_visibility",
      "fraction of pairs emitted with a coherent pump phase",
      [](Scenario& s) -> double& { return s.source.pump_visibility; }));
  source.keys.push_back(num_key(
      "depolarized_fraction",
      "fraction of pairs replaced by uncorrelated white noise",
      [](Scenario& s) -> double& { return s.source.depolarized_fraction; }));
  source.keys.push_back(num_key(
      "idler_noise_rate", "broadband background photons/s on the idler arm",
      [](Scenario& s) -> double& { return s.source.idler_noise_rate; }));
  source.keys.push_back(num_key(
      "signal_noise_rate", "broadband background photons/s on the signal arm",
      [](Scenario& s) -> double& { return s.source.signal_noise_rate; }));
  source.keys.push_back(num_key(
      "herald_correlated_fraction",
      "fraction of signal background emitted alongside pairs (filter "
      "leakage) instead of stationary background",
      [](Scenario& s) -> double& {
        return s.source.herald_correlated_fraction;
      }));
  source.keys.push_back(num_key(
      "prompt_spread",
      "arrival spread of pair-correlated background, seconds",
      [](Scenario& s) -> double& { return s.source.prompt_spread; }));
  out.push_back(std::move(source));

  SectionDef memory{"memory", {}};
  memory.keys.push_back(num_key(
      "comb_period_delta", "comb tooth spacing in Hz; echo delay = 1/delta",
      [](Scenario& s) -> double& { return s.memory.comb_period_delta; }));
  memory.keys.push_back(num_key(
      "eta0", "zero-delay internal storage efficiency",
      [](Scenario& s) -> double& { return s.memory.eta0; }));
  memory.keys.push_back(num_key(
      "t2_eff", "effective coherence time governing echo decay, seconds",
      [](Scenario& s) -> double& { return s.memory.t2_eff; }));
  memory.keys.push_back(num_key(
      "device_transmission", "passive device transmission",
      [](Scenario& s) -> double& { return s.memory.device_transmission; }));
  memory.keys.push_back(num_key(
      "extra_insertion_loss",
      "additional transmission factor (1 = lossless)",
      [](Scenario& s) -> double& { return s.memory.extra_insertion_loss; }));
  memory.keys.push_back(KeyDef{
      "mode", "'afc' stores and re-emits; 'transparency' only transmits",
      [](Scenario& s, const std::string& v) {
        s.memory.mode = memory_mode_from_string(v);
      },
      [](const Scenario& s) { return to_string(s.memory.mode); }});
  out.push_back(std::move(memory));

  for (bool idler : {true, false}) {
    std::string section = idler ? "analyzer_idler" : "analyzer_signal";
    auto field = [idler](Scenario& s) -> ScenarioAnalyzer& {
      return idler ? s.analyzer_idler : s.analyzer_signal;
    };
    SectionDef a{section, {}};
    a.keys.push_back(num_key(
        "delay", "long-arm excess delay, seconds",
        [field](Scenario& s) -> double& { return field(s).delay; }));
    a.keys.push_back(num_key(
        "phase", "analyzer phase in units of pi (0.5 = pi/2)",
        [field](Scenario& s) -> double& { return field(s).phase_over_pi; }));
    a.keys.push_back(num_key(
        "t_short", "short-arm intensity transmission",
        [field](Scenario& s) -> double& { return field(s).t_short; }));
    a.keys.push_back(num_key(
        "t_long", "long-arm intensity transmission",
        [field](Scenario& s) -> double& { return field(s).t_long; }));
    out.push_back(std::move(a));
  }

  for (bool idler : {true, false}) {
    std::string section = idler ? "detector_idler" : "detector_signal";
    auto field = [idler](Scenario& s) -> DetectorParams& {
      return idler ? s.detector_idler : s.detector_signal;
    };
    SectionDef d{section, {}};
    d.keys.push_back(num_key(
        "efficiency", "detection efficiency",
        [field](Scenario& s) -> double& { return field(s).efficiency; }));
    d.keys.push_back(num_key(
        "dark_rate", "dark counts per second",
        [field](Scenario& s) -> double& { return field(s).dark_rate; }));
    d.keys.push_back(num_key(
        "jitter_sigma", "Gaussian timing jitter, seconds",
        [field](Scenario& s) -> double& { return field(s).jitter_sigma; }));
    d.keys.push_back(num_key(
        "dead_time", "detector dead time, seconds",
        [field](Scenario& s) -> double& { return field(s).dead_time; }));
    out.push_back(std::move(d));
  }

  SectionDef run{"run", {}};
  run.keys.push_back(num_key(
      "duration", "simulated acquisition time, seconds",
      [](Scenario& s) -> double& { return s.run.duration; }));
  run.keys.push_back(KeyDef{
      "seed", "64-bit master seed",
      [](Scenario& s, const std::string& v) { s.run.seed = parse_u64(v); },
      [](const Scenario& s) { return std::to_string(s.run.seed); }});
  run.keys.push_back(KeyDef{
      "shards", "parallelism hint; outputs are shard-count invariant",
      [](Scenario& s, const std::string& v) { s.run.shards = parse_int(v); },
      [](const Scenario& s) { return std::to_string(s.run.shards); }});
  out.push_back(std::move(run));

  SectionDef analysis{"analysis", {}};
  analysis.keys.push_back(KeyDef{
      "mode",
      "'bare' (detectors only), 'franson' (analyzers), or 'heralded-g2' "
      "(signal split on two detectors)",
      [](Scenario& s, const std::string& v) {
        s.analysis.mode = analysis_mode_from_string(v);
      },
      [](const Scenario& s) { return to_string(s.analysis.mode); }});
  analysis.keys.push_back(num_key(
      "coincidence_window", "full coincidence window width, seconds",
      [](Scenario& s) -> double& { return s.analysis.coincidence_window; }));
  analysis.keys.push_back(num_key(
      "slot_window", "full Franson slot window width, seconds",
      [](Scenario& s) -> double& { return s.analysis.slot_window; }));
  analysis.keys.push_back(KeyDef{
      "accidental_offsets",
      "comma-separated window displacements for the accidental floor, "
      "seconds past the echo offset",
      [](Scenario& s, const std::string& v) {
        s.analysis.accidental_offsets = parse_list(v);
      },
      [](const Scenario& s) {
        return fmt_list(s.analysis.accidental_offsets);
      }});
  analysis.keys.push_back(KeyDef{
      "tomography_settings", "tomography setting list; only 'default'",
      [](Scenario& s, const std::string& v) {
        s.analysis.tomography_settings = v;
      },
      [](const Scenario& s) { return s.analysis.tomography_settings; }});
  out.push_back(std::move(analysis));
  return out;
}

const std::vector<SectionDef>& the_schema() {
  static const std::vector<SectionDef> s = schema();
  return s;
}

[[noreturn]] void parse_fail(std::string_view origin, size_t line, size_t col,
                             const std::string& what) {
  std::ostringstream os;
  if (!origin.empty()) os << origin << ":";
  os << "line " << line << ", column " << col << ": " << what;
  throw std::invalid_argument(os.str());
}

}  // namespace

void Scenario::validate() const {
  source.validate();
  memory.validate();
  validate_as("analyzer.", "analyzer_idler.", [&] {
    analyzer_idler.to_mz().validate();
    if (!std::isfinite(analyzer_idler.phase_over_pi))
      throw std::invalid_argument("analyzer.phase must be finite");
  });
  validate_as("analyzer.", "analyzer_signal.", [&] {
    analyzer_signal.to_mz().validate();
    if (!std::isfinite(analyzer_signal.phase_over_pi))
      throw std::invalid_argument("analyzer.phase must be finite");
  });
  validate_as("detector.", "detector_idler.",
              [&] { detector_idler.validate(); });
  validate_as("detector.", "detector_signal.",
              [&] { detector_signal.validate(); });
  if (!std::isfinite(run.duration) || run.duration <= 0)
    throw std::invalid_argument("run.duration must be positive");
  if (run.shards < 1)
    throw std::invalid_argument("run.shards must be at least 1");
  if (run.shards > 4096)
    throw std::invalid_argument("run.shards must be at most 4096");
  if (!std::isfinite(analysis.coincidence_window) ||
      analysis.coincidence_window <= 0)
    throw std::invalid_argument("analysis.coincidence_window must be positive");
  if (!std::isfinite(analysis.slot_window) || analysis.slot_window <= 0)
    throw std::invalid_argument("analysis.slot_window must be positive");
  if (analysis.mode == AnalysisMode::franson) {
    if (analysis.slot_window >= analyzer_idler.delay ||
        analysis.slot_window >= analyzer_signal.delay)
      throw std::invalid_argument(
          "analysis.slot_window must be smaller than the analyzer delay");
  }
  if (analysis.accidental_offsets.empty())
    throw std::invalid_argument(
        "analysis.accidental_offsets must not be empty");
  for (double d : analysis.accidental_offsets)
    if (!std::isfinite(d) || d == 0)
      throw std::invalid_argument(
          "analysis.accidental_offsets entries must be finite and nonzero");
  if (analysis.tomography_settings != "default")
    throw std::invalid_argument(
        "analysis.tomography_settings: only 'default' is available");
}

Scenario parse_scenario(std::string_view text, std::string_view origin) {
  Scenario s;
  const auto& sections = the_schema();
  std::vector<std::string> section_names;
  section_names.reserve(sections.size());
  for (const auto& sec : sections) section_names.push_back(sec.name);

  const SectionDef* current = nullptr;
  std::map<std::string, bool> seen;  // "section.key" duplicates
  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    std::string_view raw = text.substr(
        pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    ++line_no;
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;

    std::string_view line = raw;
    if (size_t hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) continue;
    size_t e = line.find_last_not_of(" \t\r");
    std::string_view body = line.substr(b, e - b + 1);
    size_t col = b + 1;

    if (body.front() == '[') {
      if (body.back() != ']')
        parse_fail(origin, line_no, col + body.size() - 1,
                   "missing ']' after section name");
      std::string name(body.substr(1, body.size() - 2));
      auto it = std::find_if(sections.begin(), sections.end(),
                             [&](const SectionDef& d) { return d.name == name; });
      if (it == sections.end())
        parse_fail(origin, line_no, col,
                   "unknown section '" + name + "'" +
                       suggest(name, section_names));
      current = &*it;
      continue;
    }

    size_t eq = body.find('=');
    if (eq == std::string_view::npos)
      parse_fail(origin, line_no, col, "expected 'key = value'");
    std::string key(body.substr(0, eq));
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t'))
      key.pop_back();
    std::string value(body.substr(eq + 1));
    size_t vb = value.find_first_not_of(" \t");
    value = vb == std::string::npos ? "" : value.substr(vb);
    if (key.empty())
      parse_fail(origin, line_no, col, "missing key before '='");
    if (!current)
      parse_fail(origin, line_no, col,
                 "key '" + key + "' appears before any [section]");

    std::vector<std::string> key_names;
    key_names.reserve(current->keys.size());
    for (const auto& k : current->keys) key_names.push_back(k.name);
    auto kit = std::find_if(current->keys.begin(), current->keys.end(),
                            [&](const KeyDef& k) { return k.name == key; });
    if (kit == current->keys.end())
      parse_fail(origin, line_no, col,
                 "unknown key '" + current->name + "." + key + "'" +
                     suggest(key, key_names));
    std::string path = current->name + "." + key;
    if (seen[path])
      parse_fail(origin, line_no, col, "duplicate key '" + path + "'");
    seen[path] = true;
    if (value.empty())
      parse_fail(origin, line_no,
                 col + (body.find('=') + 1),
                 "missing value for '" + path + "'");
    try {
      kit->set(s, value);
    } catch (const std::invalid_argument& err) {
      parse_fail(origin, line_no, col + eq + 1, path + ": " + err.what());
    }
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::invalid_argument("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

std::string serialize_scenario(const Scenario& s) {
  std::ostringstream os;
  bool first = true;
  for (const auto& sec : the_schema()) {
    if (!first) os << '\n';
    first = false;
    os << '[' << sec.name << "]\n";
    for (const auto& k : sec.keys) os << k.name << " = " << k.get(s) << '\n';
  }
  return os.str();
}

std::string annotated_default_scenario() {
  Scenario s;
  std::ostringstream os;
  bool first = true;
  for (const auto& sec : the_schema()) {
    if (!first) os << '\n';
    first = false;
    os << '[' << sec.name << "]\n";
    for (const auto& k : sec.keys) {
      os << "# " << k.doc << '\n';
      os << k.name << " = " << k.get(s) << '\n';
    }
  }
  return os.str();
}

}  // namespace qnode
