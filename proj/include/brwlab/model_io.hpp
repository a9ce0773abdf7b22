#pragma once

// Flat key-value files (models and scenarios), the preset catalogue, and the
// CSV writers.  Parse errors carry the offending line number.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "brwlab/brw.hpp"
#include "brwlab/common.hpp"
#include "brwlab/offspring.hpp"
#include "brwlab/renewal.hpp"
#include "brwlab/walk.hpp"

namespace brwlab {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// key = value parsing, '#' comments, line numbers preserved

struct KVFile {
  struct Entry {
    std::string key, value;
    std::size_t line = 0;
  };
  std::vector<Entry> entries;

  const Entry* find(const std::string& key) const {
    for (const auto& e : entries)
      if (e.key == key) return &e;
    return nullptr;
  }
  bool has(const std::string& key) const { return find(key) != nullptr; }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] inline void config_fail(std::size_t line, const std::string& msg) {
  throw ConfigError("line " + std::to_string(line) + ": " + msg);
}

inline double parse_double(const std::string& tok, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) config_fail(line, "trailing characters in number '" + tok + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    config_fail(line, "expected a number, got '" + tok + "'");
  }
}

inline long long parse_int(const std::string& tok, std::size_t line) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(tok, &used);
    if (used != tok.size()) config_fail(line, "trailing characters in integer '" + tok + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    config_fail(line, "expected an integer, got '" + tok + "'");
  }
}

inline std::uint64_t parse_u64(const std::string& tok, std::size_t line) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(tok, &used);
    if (used != tok.size()) config_fail(line, "trailing characters in integer '" + tok + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    config_fail(line, "expected an unsigned integer, got '" + tok + "'");
  }
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

// "a:b,c:d" -> {(a,b),(c,d)}
inline std::vector<std::pair<double, double>> parse_pair_list(const std::string& s,
                                                             std::size_t line) {
  std::vector<std::pair<double, double>> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos)
      config_fail(line, "expected 'value:weight' pairs, got '" + item + "'");
    out.emplace_back(parse_double(trim(item.substr(0, colon)), line),
                     parse_double(trim(item.substr(colon + 1)), line));
  }
  if (out.empty()) config_fail(line, "empty pair list");
  return out;
}

}  // namespace detail

inline KVFile parse_kv(std::istream& in) {
  KVFile out;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = detail::trim(raw);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      detail::config_fail(lineno, "expected 'key = value', got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) detail::config_fail(lineno, "empty key");
    if (value.empty()) detail::config_fail(lineno, "empty value for key '" + key + "'");
    out.entries.push_back({key, value, lineno});
  }
  return out;
}

// ---------------------------------------------------------------------------
// model files: either an offspring model or a raw step law

struct LoadedModel {
  std::string id;
  std::optional<OffspringModel> offspring;
  std::optional<StepLaw> walk;
};

namespace detail {

inline CountLaw parse_count(const KVFile::Entry& e) {
  const auto toks = split_ws(e.value);
  if (toks.empty()) config_fail(e.line, "empty count law");
  if (toks[0] == "deterministic" && toks.size() == 2)
    return CountLaw::deterministic(parse_int(toks[1], e.line));
  if (toks[0] == "poisson" && toks.size() == 2)
    return CountLaw::poisson(parse_double(toks[1], e.line));
  if (toks[0] == "uniform_range" && toks.size() == 3)
    return CountLaw::uniform_range(parse_int(toks[1], e.line), parse_int(toks[2], e.line));
  config_fail(e.line, "bad count law '" + e.value +
                          "' (want: deterministic N | poisson MEAN | uniform_range LO HI)");
}

inline DisplacementLaw parse_displacement(const KVFile::Entry& e) {
  const auto toks = split_ws(e.value);
  if (toks.empty()) config_fail(e.line, "empty displacement law");
  if (toks[0] == "point" && toks.size() == 2)
    return DisplacementLaw::point(parse_double(toks[1], e.line));
  if (toks[0] == "normal" && toks.size() == 3)
    return DisplacementLaw::normal(parse_double(toks[1], e.line),
                                   parse_double(toks[2], e.line));
  if (toks[0] == "uniform" && toks.size() == 3)
    return DisplacementLaw::uniform(parse_double(toks[1], e.line),
                                    parse_double(toks[2], e.line));
  if (toks[0] == "atoms" && toks.size() == 2)
    return DisplacementLaw::make_atoms(parse_pair_list(toks[1], e.line));
  config_fail(e.line, "bad displacement law '" + e.value +
                          "' (want: point X | normal MU SIGMA2 | uniform LO HI | "
                          "atoms X:P,...)");
}

}  // namespace detail

inline LoadedModel parse_model(const KVFile& kv, const std::string& id = "model") {
  const KVFile::Entry* kind = kv.find("kind");
  if (!kind) throw ConfigError("line 1: model file needs a 'kind' key");
  LoadedModel out;
  out.id = id;
  auto need = [&](const char* key) -> const KVFile::Entry& {
    const KVFile::Entry* e = kv.find(key);
    if (!e)
      detail::config_fail(kind->line,
                          "kind '" + kind->value + "' needs a '" + key + "' key");
    return *e;
  };

  if (kind->value == "galton_watson") {
    out.offspring = OffspringModel::galton_watson(detail::parse_count(need("count")));
  } else if (kind->value == "independent") {
    out.offspring = OffspringModel::independent(
        detail::parse_count(need("count")), detail::parse_displacement(need("displacement")));
  } else if (kind->value == "lattice") {
    const KVFile::Entry& e = need("entries");
    std::vector<OffspringModel::LatticeEntry> entries;
    for (auto& [d, c] : detail::parse_pair_list(e.value, e.line))
      entries.push_back({d, c});
    out.offspring = OffspringModel::lattice(std::move(entries));
  } else if (kind->value == "walk_deterministic") {
    const KVFile::Entry& e = need("step");
    out.walk = StepLaw::deterministic(detail::parse_double(e.value, e.line));
  } else if (kind->value == "walk_gaussian") {
    const KVFile::Entry& mu = need("mu");
    const KVFile::Entry& s2 = need("sigma2");
    out.walk = StepLaw::gaussian(detail::parse_double(mu.value, mu.line),
                                 detail::parse_double(s2.value, s2.line));
  } else if (kind->value == "walk_atoms") {
    const KVFile::Entry& e = need("atoms");
    out.walk = StepLaw::atoms(detail::parse_pair_list(e.value, e.line));
  } else {
    detail::config_fail(kind->line, "unknown kind '" + kind->value + "'");
  }

  if (out.offspring) {
    if (const KVFile::Entry* e = kv.find("max_children"))
      out.offspring->set_max_children(
          static_cast<std::size_t>(detail::parse_int(e->value, e->line)));
    if (const KVFile::Entry* e = kv.find("canonicalize"))
      out.offspring = out.offspring->canonicalize(detail::parse_double(e->value, e->line));
  }
  return out;
}

inline LoadedModel parse_model(std::istream& in, const std::string& id = "model") {
  const KVFile kv = parse_kv(in);
  return parse_model(kv, id);
}

inline std::string serialize_model(const OffspringModel& model) {
  std::ostringstream out;
  auto count_line = [&](const CountLaw& c) {
    switch (c.kind) {
      case CountLaw::Kind::Deterministic:
        out << "count = deterministic " << c.value << "\n";
        break;
      case CountLaw::Kind::Poisson:
        out << "count = poisson " << fmt17(c.poisson_mean) << "\n";
        break;
      case CountLaw::Kind::UniformRange:
        out << "count = uniform_range " << c.lo << " " << c.hi << "\n";
        break;
    }
  };
  switch (model.kind()) {
    case OffspringModel::Kind::GaltonWatson:
      out << "kind = galton_watson\n";
      count_line(model.count_law());
      break;
    case OffspringModel::Kind::IndependentDisplacements: {
      out << "kind = independent\n";
      count_line(model.count_law());
      const DisplacementLaw& d = model.displacement_law();
      switch (d.kind) {
        case DisplacementLaw::Kind::Point:
          out << "displacement = point " << fmt17(d.p1) << "\n";
          break;
        case DisplacementLaw::Kind::Normal:
          out << "displacement = normal " << fmt17(d.p1) << " " << fmt17(d.p2) << "\n";
          break;
        case DisplacementLaw::Kind::Uniform:
          out << "displacement = uniform " << fmt17(d.p1) << " " << fmt17(d.p2) << "\n";
          break;
        case DisplacementLaw::Kind::Atoms: {
          out << "displacement = atoms ";
          bool first = true;
          for (auto& [x, p] : d.atoms) {
            out << (first ? "" : ",") << fmt17(x) << ":" << fmt17(p);
            first = false;
          }
          out << "\n";
          break;
        }
      }
      break;
    }
    case OffspringModel::Kind::Lattice: {
      out << "kind = lattice\nentries = ";
      bool first = true;
      for (auto& e : model.lattice_entries()) {
        out << (first ? "" : ",") << fmt17(e.displacement) << ":" << fmt17(e.mean_count);
        first = false;
      }
      out << "\n";
      break;
    }
    case OffspringModel::Kind::Custom:
      throw NoClosedForm("serialize_model: custom models have no file form");
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// scenarios

struct Scenario {
  enum class Task { Analyze, Renewal, Brw, Verify };
  std::string name;
  Task task = Task::Analyze;
  std::string preset;      // one of preset / model_file must be set (verify: neither)
  std::string model_file;
  std::optional<double> a;  // falls back to the preset default
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir = ".";
  std::size_t samples = 200000;    // renewal path budget
  std::size_t replicates = 200;    // brw ensemble size
  std::optional<std::size_t> horizon;  // renewal horizon cap / brw n_max
  std::size_t cap = 10000000;      // population cap
  std::optional<double> x_min, x_max;
  std::size_t x_points = 8;
};

inline const char* to_string(Scenario::Task t) {
  switch (t) {
    case Scenario::Task::Analyze: return "analyze";
    case Scenario::Task::Renewal: return "renewal";
    case Scenario::Task::Brw: return "brw";
    default: return "verify";
  }
}

inline Scenario parse_scenario(const KVFile& kv) {
  Scenario s;
  bool task_set = false;
  for (const auto& e : kv.entries) {
    if (e.key == "name") {
      s.name = e.value;
    } else if (e.key == "task") {
      if (e.value == "analyze") s.task = Scenario::Task::Analyze;
      else if (e.value == "renewal") s.task = Scenario::Task::Renewal;
      else if (e.value == "brw") s.task = Scenario::Task::Brw;
      else if (e.value == "verify") s.task = Scenario::Task::Verify;
      else detail::config_fail(e.line, "unknown task '" + e.value + "'");
      task_set = true;
    } else if (e.key == "preset") {
      s.preset = e.value;
    } else if (e.key == "model_file") {
      s.model_file = e.value;
    } else if (e.key == "a") {
      s.a = detail::parse_double(e.value, e.line);
      if (!(*s.a > 0.0)) detail::config_fail(e.line, "a must be positive");
    } else if (e.key == "seed") {
      s.seed = detail::parse_u64(e.value, e.line);
      s.seed_set = true;
    } else if (e.key == "out") {
      s.out_dir = e.value;
    } else if (e.key == "samples") {
      const long long v = detail::parse_int(e.value, e.line);
      if (v <= 0) detail::config_fail(e.line, "samples must be positive");
      s.samples = static_cast<std::size_t>(v);
    } else if (e.key == "replicates") {
      const long long v = detail::parse_int(e.value, e.line);
      if (v <= 0) detail::config_fail(e.line, "replicates must be positive");
      s.replicates = static_cast<std::size_t>(v);
    } else if (e.key == "horizon") {
      const long long v = detail::parse_int(e.value, e.line);
      if (v <= 0) detail::config_fail(e.line, "horizon must be positive");
      s.horizon = static_cast<std::size_t>(v);
    } else if (e.key == "cap") {
      const long long v = detail::parse_int(e.value, e.line);
      if (v <= 0) detail::config_fail(e.line, "cap must be positive");
      s.cap = static_cast<std::size_t>(v);
    } else if (e.key == "x_min") {
      s.x_min = detail::parse_double(e.value, e.line);
    } else if (e.key == "x_max") {
      s.x_max = detail::parse_double(e.value, e.line);
    } else if (e.key == "x_points") {
      const long long v = detail::parse_int(e.value, e.line);
      if (v <= 0) detail::config_fail(e.line, "x_points must be positive");
      s.x_points = static_cast<std::size_t>(v);
    } else {
      detail::config_fail(e.line, "unknown key '" + e.key + "'");
    }
  }
  if (!task_set) throw ConfigError("line 1: scenario needs a 'task' key");
  if (!s.seed_set) throw ConfigError("line 1: scenario needs a 'seed' key");
  if (s.task != Scenario::Task::Verify && s.preset.empty() && s.model_file.empty())
    throw ConfigError("line 1: scenario needs a 'preset' or 'model_file' key");
  if (!s.preset.empty() && !s.model_file.empty())
    throw ConfigError("line 1: 'preset' and 'model_file' are mutually exclusive");
  return s;
}

inline Scenario parse_scenario(std::istream& in) {
  const KVFile kv = parse_kv(in);
  return parse_scenario(kv);
}

inline std::string serialize_scenario(const Scenario& s) {
  std::ostringstream out;
  if (!s.name.empty()) out << "name = " << s.name << "\n";
  out << "task = " << to_string(s.task) << "\n";
  if (!s.preset.empty()) out << "preset = " << s.preset << "\n";
  if (!s.model_file.empty()) out << "model_file = " << s.model_file << "\n";
  if (s.a) out << "a = " << fmt17(*s.a) << "\n";
  out << "seed = " << s.seed << "\n";
  out << "out = " << s.out_dir << "\n";
  out << "samples = " << s.samples << "\n";
  out << "replicates = " << s.replicates << "\n";
  if (s.horizon) out << "horizon = " << *s.horizon << "\n";
  out << "cap = " << s.cap << "\n";
  if (s.x_min) out << "x_min = " << fmt17(*s.x_min) << "\n";
  if (s.x_max) out << "x_max = " << fmt17(*s.x_max) << "\n";
  out << "x_points = " << s.x_points << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// preset catalogue

struct Preset {
  std::string name;
  std::string summary;
  std::optional<OffspringModel> offspring;
  std::optional<StepLaw> walk;
  double default_a = 0.1;
};

inline const std::vector<Preset>& preset_catalogue() {
  static const std::vector<Preset> presets = [] {
    std::vector<Preset> p;
    p.push_back({"gw-example",
                 "Galton-Watson, J uniform on {1,2,3}, mean 2, children displaced by "
                 "log 2; a = log(2)/3",
                 OffspringModel::galton_watson(CountLaw::uniform_range(1, 3)), std::nullopt,
                 std::log(2.0) / 3.0});
    p.push_back({"gaussian-brw",
                 "Poisson(2) children with N(log 2 + 1/8, 1/4) displacements "
                 "(canonical); a = 0.15",
                 OffspringModel::independent(
                     CountLaw::poisson(2.0),
                     DisplacementLaw::normal(std::log(2.0) + 0.125, 0.25)),
                 std::nullopt, 0.15});
    p.push_back({"lattice-twopoint",
                 "lattice intensities at -1 and 2 tuned so the associated walk is the "
                 "two-point law; a = 0.1",
                 OffspringModel::lattice({{-1.0, std::exp(-1.0) / 3.0},
                                          {2.0, 2.0 * std::exp(2.0) / 3.0}}),
                 std::nullopt, 0.1});
    p.push_back({"two-point-walk", "step law P(-1) = 1/3, P(2) = 2/3; a = 0.1",
                 std::nullopt,
                 StepLaw::atoms({{-1.0, 1.0 / 3.0}, {2.0, 2.0 / 3.0}}), 0.1});
    p.push_back({"deterministic-step", "step law T = 1; a = 0.3", std::nullopt,
                 StepLaw::deterministic(1.0), 0.3});
    p.push_back({"symmetric-walk",
                 "step law P(-1) = P(1) = 1/2 (R = 0, V infinite for every a); a = 0.1",
                 std::nullopt, StepLaw::atoms({{-1.0, 0.5}, {1.0, 0.5}}), 0.1});
    return p;
  }();
  return presets;
}

inline const Preset* find_preset(const std::string& name) {
  for (const auto& p : preset_catalogue())
    if (p.name == name) return &p;
  return nullptr;
}

// ---------------------------------------------------------------------------
// CSV writers

inline void write_trace_csv(std::ostream& out, const MartingaleTrace& trace) {
  out << "n,W_n,Wtilde_next,R_n,increment,M_n,pop_size,truncated,mismatch_flag\n";
  for (const auto& row : trace.rows) {
    out << row.n << ',' << fmt17(row.w) << ',' << fmt17(row.wtilde_next) << ','
        << fmt17(row.r) << ',' << fmt17(row.increment) << ',' << fmt17(row.m) << ','
        << row.pop_size << ',' << (row.truncated ? 1 : 0) << ','
        << (row.mismatch ? 1 : 0) << '\n';
  }
}

inline const char* to_string(RenewalMethod m) {
  switch (m) {
    case RenewalMethod::Tilted: return "tilted";
    case RenewalMethod::Direct: return "direct";
    default: return "closed_form";
  }
}

inline void write_renewal_csv(std::ostream& out,
                              const std::vector<RenewalEstimate>& estimates) {
  out << "x,value,stderr,horizon,tail_bound,method,horizon_exceeded\n";
  for (const auto& e : estimates) {
    out << fmt17(e.x) << ',' << fmt17(e.value) << ',' << fmt17(e.se) << ',' << e.horizon
        << ',' << fmt17(e.tail_bound) << ',' << to_string(e.method) << ','
        << (e.horizon_exceeded ? 1 : 0) << '\n';
  }
}

inline const char* to_string(AsymptotePrediction::Target t) {
  switch (t) {
    case AsymptotePrediction::Target::V: return "V";
    case AsymptotePrediction::Target::VIncrement: return "V_increment";
    case AsymptotePrediction::Target::Va: return "Va";
    case AsymptotePrediction::Target::VaFirstMoment: return "Va_first_moment";
    default: return "Va_inverse_moment";
  }
}

inline void write_predictions_csv(std::ostream& out,
                                  const std::vector<AsymptotePrediction>& preds) {
  out << "target,gamma,exponent,constant,arithmetic,span\n";
  for (const auto& p : preds) {
    out << to_string(p.target) << ',' << fmt17(p.gamma) << ',' << fmt17(p.exponent)
        << ',' << fmt17(p.constant) << ',' << (p.arithmetic ? 1 : 0) << ','
        << fmt17(p.span) << '\n';
  }
}

}  // namespace brwlab
