#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavmag/errors.hpp"
#include "cavmag/lanczos.hpp"
#include "cavmag/observables.hpp"
#include "cavmag/params.hpp"

namespace cavmag {

enum class Mode { ground, observables, sweep, phase_diagram, meanfield, scaling };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::ground: return "ground";
    case Mode::observables: return "observables";
    case Mode::sweep: return "sweep";
    case Mode::phase_diagram: return "phase-diagram";
    case Mode::meanfield: return "meanfield";
    case Mode::scaling: return "scaling";
  }
  return "ground";
}

inline Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::ground, Mode::observables, Mode::sweep, Mode::phase_diagram, Mode::meanfield, Mode::scaling})
    if (to_string(m) == s) return m;
  throw ConfigError("mode: unknown value '" + s + "'");
}

inline std::string to_string(Axis a) { return a == Axis::x ? "x" : a == Axis::y ? "y" : "z"; }

inline std::string to_string(NormMode m) { return m == NormMode::per_pair ? "per_pair" : "per_site"; }

/// Values of one swept parameter: an explicit list, or start/stop/count on a
/// linear or logarithmic scale.
struct SweepAxis {
  std::string parameter = "U_l";  ///< "U_l" or "t"
  std::vector<double> values;
};

/// How cavity constants are attached to ED points.
struct CavitySpec {
  enum class Kind { none, constants, detuning };
  Kind kind = Kind::none;
  CavityParams constants;  ///< Kind::constants
  double abs_delta_tilde = 1.0, kappa = 1.0;  ///< Kind::detuning: G follows each U_l

  std::optional<CavityParams> for_point(const ModelParams& m) const {
    if (kind == Kind::none) return std::nullopt;
    if (kind == Kind::constants) return constants;
    return cavity_for(m.U_l, m.L, abs_delta_tilde, kappa);
  }
};

struct MeanFieldSpec {
  double abs_delta_tilde = 10.0;
  double kappa = 1.0;
  double damping = 0.5;
  double tolerance = 1e-10;
  int max_iterations = 10000;
};

struct RunConfig {
  Mode mode = Mode::ground;
  ModelParams model;
  CavitySpec cavity;
  std::optional<SweepAxis> sweep;
  std::vector<int> L_values;
  std::vector<double> t_values;
  std::vector<Axis> boundary_axes{Axis::z, Axis::x};
  MeanFieldSpec meanfield;
  LanczosOptions lanczos;
  std::size_t k_points = 1025;
  NormMode norm_mode = NormMode::per_pair;
  int workers = 1;
  std::string output_dir = "out";
  nlohmann::ordered_json echo;  ///< validated config with defaults filled
};

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ConfigError((where.empty() ? "" : where + ".") + key + ": unknown key");
}

template <class T>
T get_as(const json& obj, const std::string& key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  const std::string name = (where.empty() ? "" : where + ".") + key;
  try {
    const json& v = obj.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(name + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(name + ": expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(name + ": expected a number");
    } else {
      if (!v.is_string()) throw ConfigError(name + ": expected a string");
    }
    return v.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(name + ": " + e.what());
  }
}

inline std::vector<double> number_list(const json& v, const std::string& name) {
  if (!v.is_array()) throw ConfigError(name + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(name + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline SweepAxis parse_sweep(const json& s) {
  if (!s.is_object()) throw ConfigError("sweep: expected an object");
  reject_unknown(s, "sweep", {"parameter", "values", "start", "stop", "count", "scale"});
  SweepAxis ax;
  ax.parameter = get_as<std::string>(s, "parameter", "sweep", "U_l");
  if (ax.parameter != "U_l" && ax.parameter != "t") throw ConfigError("sweep.parameter: must be \"U_l\" or \"t\"");
  if (s.contains("values")) {
    for (const char* k : {"start", "stop", "count", "scale"})
      if (s.contains(k)) throw ConfigError(std::string("sweep.") + k + ": not allowed together with sweep.values");
    ax.values = number_list(s.at("values"), "sweep.values");
    return ax;
  }
  for (const char* k : {"start", "stop", "count"})
    if (!s.contains(k)) throw ConfigError(std::string("sweep.") + k + ": required without sweep.values");
  const double start = get_as<double>(s, "start", "sweep", 0.0);
  const double stop = get_as<double>(s, "stop", "sweep", 0.0);
  const int count = get_as<int>(s, "count", "sweep", 0);
  const std::string scale = get_as<std::string>(s, "scale", "sweep", "linear");
  if (count < 0) throw ConfigError("sweep.count: must be non-negative");
  if (scale != "linear" && scale != "log") throw ConfigError("sweep.scale: must be \"linear\" or \"log\"");
  if (scale == "log" && (start <= 0.0 || stop <= 0.0))
    throw ConfigError("sweep.start: log scale needs positive start and stop");
  for (int i = 0; i < count; ++i) {
    const double f = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    ax.values.push_back(scale == "linear" ? start + f * (stop - start)
                                          : std::exp(std::log(start) + f * (std::log(stop) - std::log(start))));
  }
  if (count > 1) ax.values.back() = stop;
  return ax;
}

inline Axis parse_axis(const json& v, const std::string& name) {
  if (!v.is_string()) throw ConfigError(name + ": expected \"x\", \"y\" or \"z\"");
  const std::string s = v.get<std::string>();
  if (s == "x") return Axis::x;
  if (s == "y") return Axis::y;
  if (s == "z") return Axis::z;
  throw ConfigError(name + ": expected \"x\", \"y\" or \"z\"");
}

inline std::pair<int, int> line_and_column(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

inline const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys{"mode",      "L",         "N",           "t",          "U_s",
                                          "U_l",       "cavity",    "sweep",       "L_values",   "t_values",
                                          "boundary_axes", "meanfield", "lanczos", "k_points",   "norm_mode",
                                          "workers",   "seed",      "output_dir"};
  return keys;
}

/// Validates a parsed config object and fills defaults.  `mode_override`
/// (from a CLI subcommand) must agree with a mode given in the file.
inline RunConfig parse_config(const nlohmann::json& j, const std::optional<Mode>& mode_override = std::nullopt) {
  using detail::get_as;
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  detail::reject_unknown(j, "", config_keys());
  RunConfig c;
  if (j.contains("mode")) {
    c.mode = parse_mode(get_as<std::string>(j, "mode", "", "ground"));
    if (mode_override && *mode_override != c.mode)
      throw ConfigError("mode: config says '" + to_string(c.mode) + "' but command is '" + to_string(*mode_override) + "'");
  } else if (mode_override) {
    c.mode = *mode_override;
  } else {
    throw ConfigError("mode: required");
  }

  for (const char* k : {"L", "t", "U_s"})
    if (!j.contains(k)) throw ConfigError(std::string(k) + ": required");
  c.model.L = get_as<int>(j, "L", "", 0);
  c.model.N = get_as<int>(j, "N", "", c.model.L);
  c.model.t = get_as<double>(j, "t", "", 0.0);
  c.model.U_s = get_as<double>(j, "U_s", "", 0.0);
  c.model.U_l = get_as<double>(j, "U_l", "", 0.0);

  if (j.contains("sweep")) c.sweep = detail::parse_sweep(j.at("sweep"));
  if (j.contains("L_values")) {
    for (double v : detail::number_list(j.at("L_values"), "L_values")) {
      if (v != std::floor(v)) throw ConfigError("L_values: entries must be integers");
      c.L_values.push_back(static_cast<int>(v));
    }
  }
  if (j.contains("t_values")) c.t_values = detail::number_list(j.at("t_values"), "t_values");
  if (j.contains("boundary_axes")) {
    const auto& b = j.at("boundary_axes");
    if (!b.is_array()) throw ConfigError("boundary_axes: expected an array");
    c.boundary_axes.clear();
    for (const auto& a : b) c.boundary_axes.push_back(detail::parse_axis(a, "boundary_axes"));
  }

  if (j.contains("cavity")) {
    const auto& cv = j.at("cavity");
    if (!cv.is_object()) throw ConfigError("cavity: expected an object");
    detail::reject_unknown(cv, "cavity", {"G", "kappa", "delta_tilde", "abs_delta_tilde"});
    if (cv.contains("abs_delta_tilde")) {
      if (cv.contains("G") || cv.contains("delta_tilde"))
        throw ConfigError("cavity.abs_delta_tilde: give either {G, kappa, delta_tilde} or {abs_delta_tilde, kappa}");
      c.cavity.kind = CavitySpec::Kind::detuning;
      c.cavity.abs_delta_tilde = get_as<double>(cv, "abs_delta_tilde", "cavity", 1.0);
      c.cavity.kappa = get_as<double>(cv, "kappa", "cavity", 1.0);
      if (!(c.cavity.abs_delta_tilde > 0.0)) throw ConfigError("cavity.abs_delta_tilde: must be positive");
      if (!(c.cavity.kappa >= 0.0)) throw ConfigError("cavity.kappa: must be non-negative");
    } else {
      for (const char* k : {"G", "delta_tilde"})
        if (!cv.contains(k)) throw ConfigError(std::string("cavity.") + k + ": required");
      c.cavity.kind = CavitySpec::Kind::constants;
      c.cavity.constants.G = get_as<double>(cv, "G", "cavity", 0.0);
      c.cavity.constants.kappa = get_as<double>(cv, "kappa", "cavity", 1.0);
      c.cavity.constants.delta_tilde = get_as<double>(cv, "delta_tilde", "cavity", 1.0);
    }
  }

  if (j.contains("meanfield")) {
    const auto& m = j.at("meanfield");
    if (!m.is_object()) throw ConfigError("meanfield: expected an object");
    detail::reject_unknown(m, "meanfield", {"abs_delta_tilde", "kappa", "damping", "tolerance", "max_iterations"});
    c.meanfield.abs_delta_tilde = get_as<double>(m, "abs_delta_tilde", "meanfield", c.meanfield.abs_delta_tilde);
    c.meanfield.kappa = get_as<double>(m, "kappa", "meanfield", c.meanfield.kappa);
    c.meanfield.damping = get_as<double>(m, "damping", "meanfield", c.meanfield.damping);
    c.meanfield.tolerance = get_as<double>(m, "tolerance", "meanfield", c.meanfield.tolerance);
    c.meanfield.max_iterations = get_as<int>(m, "max_iterations", "meanfield", c.meanfield.max_iterations);
  }

  c.lanczos.krylov_dim = 100;
  c.lanczos.keep = 50;
  if (j.contains("lanczos")) {
    const auto& l = j.at("lanczos");
    if (!l.is_object()) throw ConfigError("lanczos: expected an object");
    detail::reject_unknown(l, "lanczos", {"count", "tolerance", "max_iterations", "krylov_dim", "keep", "block_size"});
    c.lanczos.count = get_as<int>(l, "count", "lanczos", c.lanczos.count);
    c.lanczos.tolerance = get_as<double>(l, "tolerance", "lanczos", c.lanczos.tolerance);
    c.lanczos.max_iterations = get_as<int>(l, "max_iterations", "lanczos", c.lanczos.max_iterations);
    c.lanczos.krylov_dim = get_as<int>(l, "krylov_dim", "lanczos", c.lanczos.krylov_dim);
    c.lanczos.keep = get_as<int>(l, "keep", "lanczos", c.lanczos.keep);
    c.lanczos.block_size = get_as<int>(l, "block_size", "lanczos", c.lanczos.block_size);
  }
  c.lanczos.seed = get_as<std::uint64_t>(j, "seed", "", c.lanczos.seed);
  const int k_points = get_as<int>(j, "k_points", "", 1025);
  const std::string norm = get_as<std::string>(j, "norm_mode", "", "per_pair");
  c.workers = get_as<int>(j, "workers", "", 1);
  c.output_dir = get_as<std::string>(j, "output_dir", "", c.output_dir);

  // Validation.
  if (k_points < 2) throw ConfigError("k_points: must be at least 2");
  if (k_points % 2 == 0) throw ConfigError("k_points: must be odd so that the grid contains k = 0");
  c.k_points = static_cast<std::size_t>(k_points);
  if (norm == "per_pair") c.norm_mode = NormMode::per_pair;
  else if (norm == "per_site") c.norm_mode = NormMode::per_site;
  else throw ConfigError("norm_mode: must be \"per_pair\" or \"per_site\"");
  if (c.workers < 1) throw ConfigError("workers: must be at least 1");
  if (c.lanczos.count < 1) throw ConfigError("lanczos.count: must be at least 1");
  if (!(c.lanczos.tolerance > 0.0)) throw ConfigError("lanczos.tolerance: must be positive");
  if (c.lanczos.max_iterations < 1) throw ConfigError("lanczos.max_iterations: must be positive");
  if (c.lanczos.krylov_dim < 2 || c.lanczos.keep < 1 || c.lanczos.keep >= c.lanczos.krylov_dim)
    throw ConfigError("lanczos.keep: need 1 <= keep < krylov_dim");
  if (c.lanczos.block_size < 0) throw ConfigError("lanczos.block_size: must be non-negative");

  const bool ed = c.mode != Mode::meanfield;
  if (ed) {
    try {
      validate(c.model);
    } catch (const ParameterError& e) {
      throw ConfigError(std::string(c.model.L % 2 || c.model.L < 2 || c.model.L > kMaxSites ? "L" : "N") + ": " +
                        e.what());
    }
  } else {
    if (c.model.L < 2 || c.model.L > 4096) throw ConfigError("L: mean field needs 2 <= L <= 4096");
    if (c.model.N < 0 || c.model.N > 2 * c.model.L) throw ConfigError("N: must satisfy 0 <= N <= 2L");
    if (c.model.U_s != 0.0) throw ConfigError("U_s: mean field is defined for U_s = 0 only");
    if (c.cavity.kind != CavitySpec::Kind::none) throw ConfigError("cavity: mean field takes its constants from meanfield.*");
    if (!(c.meanfield.abs_delta_tilde > 0.0)) throw ConfigError("meanfield.abs_delta_tilde: must be positive");
    if (!(c.meanfield.kappa >= 0.0)) throw ConfigError("meanfield.kappa: must be non-negative");
    if (!(c.meanfield.damping > 0.0 && c.meanfield.damping <= 1.0)) throw ConfigError("meanfield.damping: must lie in (0, 1]");
    if (!(c.meanfield.tolerance > 0.0)) throw ConfigError("meanfield.tolerance: must be positive");
    if (c.meanfield.max_iterations < 1) throw ConfigError("meanfield.max_iterations: must be positive");
  }

  const bool sweeping = c.mode == Mode::sweep || c.mode == Mode::phase_diagram || c.mode == Mode::meanfield ||
                        c.mode == Mode::scaling;
  if (sweeping && !c.sweep) throw ConfigError("sweep: required in mode " + to_string(c.mode));
  if (!sweeping && c.sweep) throw ConfigError("sweep: not used in mode " + to_string(c.mode));
  if (c.sweep && c.sweep->parameter == "t" && (c.mode != Mode::sweep))
    throw ConfigError("sweep.parameter: only U_l can be swept in mode " + to_string(c.mode));
  if (c.sweep)
    for (double v : c.sweep->values)
      if (!std::isfinite(v)) throw ConfigError("sweep.values: entries must be finite");
  if (c.mode == Mode::scaling) {
    std::set<int> distinct(c.L_values.begin(), c.L_values.end());
    if (distinct.size() < 3) throw ConfigError("L_values: scaling needs at least three distinct sizes");
    for (int L : c.L_values) {
      ModelParams m = c.model;
      m.L = m.N = L;
      try {
        validate(m);
      } catch (const ParameterError& e) {
        throw ConfigError(std::string("L_values: ") + e.what());
      }
    }
    if (c.boundary_axes.size() != 1) throw ConfigError("boundary_axes: scaling needs exactly one axis");
  } else if (!c.L_values.empty()) {
    throw ConfigError("L_values: only used in mode scaling");
  }
  if (c.mode == Mode::phase_diagram) {
    if (c.t_values.empty()) c.t_values = {c.model.t};
  } else if (!c.t_values.empty()) {
    throw ConfigError("t_values: only used in mode phase-diagram");
  }
  for (Axis a : c.boundary_axes)
    if (a == Axis::y) throw ConfigError("boundary_axes: only \"x\" and \"z\" are classified");

  // Physical consistency of fixed cavity constants.
  if (c.cavity.kind == CavitySpec::Kind::constants) {
    if (c.sweep && c.sweep->parameter == "U_l")
      throw ConfigError("cavity: fixed {G, kappa, delta_tilde} cannot follow a U_l sweep; use {abs_delta_tilde, kappa}");
    try {
      check_consistency(c.model, c.cavity.constants);
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("cavity: ") + e.what());
    }
  }

  // Echo with defaults filled.
  auto& e = c.echo;
  e["mode"] = to_string(c.mode);
  e["L"] = c.model.L;
  e["N"] = c.model.N;
  e["t"] = c.model.t;
  e["U_s"] = c.model.U_s;
  e["U_l"] = c.model.U_l;
  if (c.cavity.kind == CavitySpec::Kind::constants)
    e["cavity"] = {{"G", c.cavity.constants.G}, {"kappa", c.cavity.constants.kappa},
                   {"delta_tilde", c.cavity.constants.delta_tilde}};
  else if (c.cavity.kind == CavitySpec::Kind::detuning)
    e["cavity"] = {{"abs_delta_tilde", c.cavity.abs_delta_tilde}, {"kappa", c.cavity.kappa}};
  if (c.sweep) e["sweep"] = {{"parameter", c.sweep->parameter}, {"values", c.sweep->values}};
  if (c.mode == Mode::scaling) e["L_values"] = c.L_values;
  if (c.mode == Mode::phase_diagram) e["t_values"] = c.t_values;
  if (c.mode == Mode::scaling || c.mode == Mode::phase_diagram) {
    auto axes = nlohmann::ordered_json::array();
    for (Axis a : c.boundary_axes) axes.push_back(to_string(a));
    e["boundary_axes"] = axes;
  }
  if (c.mode == Mode::meanfield)
    e["meanfield"] = {{"abs_delta_tilde", c.meanfield.abs_delta_tilde}, {"kappa", c.meanfield.kappa},
                      {"damping", c.meanfield.damping}, {"tolerance", c.meanfield.tolerance},
                      {"max_iterations", c.meanfield.max_iterations}};
  else
    e["lanczos"] = {{"count", c.lanczos.count}, {"tolerance", c.lanczos.tolerance},
                    {"max_iterations", c.lanczos.max_iterations}, {"krylov_dim", c.lanczos.krylov_dim},
                    {"keep", c.lanczos.keep}, {"block_size", c.lanczos.block_size}};
  e["k_points"] = c.k_points;
  e["norm_mode"] = to_string(c.norm_mode);
  e["seed"] = c.lanczos.seed;
  e["workers"] = c.workers;
  e["output_dir"] = c.output_dir;
  return c;
}

/// Parses a JSON config; syntax errors report line and column.
inline RunConfig parse_config_text(const std::string& text, const std::optional<Mode>& mode_override = std::nullopt) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_and_column(text, e.byte);
    std::ostringstream msg;
    msg << "config parse error at line " << line << ", column " << col << ": " << e.what();
    throw ConfigError(msg.str());
  }
  return parse_config(j, mode_override);
}

inline RunConfig load_config(const std::string& path, const std::optional<Mode>& mode_override = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_text(buf.str(), mode_override);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace cavmag
