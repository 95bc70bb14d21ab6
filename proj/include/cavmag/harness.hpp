#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

#include "cavmag/config.hpp"
#include "cavmag/meanfield.hpp"
#include "cavmag/point.hpp"

// Sweep execution and serialization.  Every point runs in isolation: a failed
// point is recorded and the sweep continues.  Output order follows input order.

namespace cavmag {

#ifndef CAVMAG_VERSION
#define CAVMAG_VERSION "0.1.0+unknown"
#endif

inline constexpr const char* kVersion = CAVMAG_VERSION;

inline constexpr const char* kResultsHeader =
    "L,N,t,U_s,U_l,G,kappa,delta_tilde,theta_z,theta_x,label,S_z_at_0,S_z_at_pi,S_x_at_0,S_x_at_pi,"
    "n_photon,fluct_ratio,gap,degenerate,converged";

inline constexpr const char* kMeanFieldHeader =
    "L,N,t,U_l,G,kappa,delta_tilde,alpha_re,alpha_im,alpha_sq,order_parameter,energy,iterations,converged,"
    "fixed_points";

inline constexpr const char* kBoundariesHeader = "L,t,U_s,axis,status,crossings,U_c,bracket_lo,bracket_hi,evaluations";

/// One exact-diagonalization point.
struct PointRecord {
  ModelParams model;
  std::optional<CavityParams> cavity;
  std::optional<PointResult> result;  ///< empty when the point failed
  std::string error;
  double seconds = 0.0;
};

struct MeanFieldRecord {
  MeanFieldParams params;
  double U_l = 0.0;
  std::optional<MeanFieldSolution> solution;
  std::string error;
  double seconds = 0.0;
};

/// Location of one sign change of the boundary indicator along U_l.
struct BoundaryRecord {
  int L = 0;
  double t = 0.0, U_s = 0.0;
  Axis axis = Axis::z;
  std::string status;  ///< "found", "none" or "failed"
  int crossings = 0;   ///< sign changes seen on the scan grid
  std::optional<BisectionResult> bisection;
  std::string error;
  double seconds = 0.0;
};

struct RunOutcome {
  Mode mode = Mode::ground;
  std::vector<PointRecord> points;
  std::vector<MeanFieldRecord> meanfield;
  std::vector<BoundaryRecord> boundaries;
  std::optional<ScalingFit> fit;
  std::string fit_error;
  std::vector<std::string> files;
  double seconds = 0.0;

  std::size_t failed_points() const {
    std::size_t n = 0;
    for (const auto& p : points) n += !p.result;
    for (const auto& m : meanfield) n += !m.solution;
    for (const auto& b : boundaries) n += b.status == "failed";
    return n;
  }
  /// 0 when everything succeeded, 2 on partial failure.
  int exit_code() const {
    if (failed_points() > 0) return 2;
    if (mode == Mode::scaling && !fit) return 2;
    return 0;
  }
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Runs task(i) for i in [0, n) on `workers` threads.  Tasks must not throw.
template <class Task>
void parallel_for(std::size_t n, int workers, Task&& task) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
#ifdef _OPENMP
  const int inner = std::max(1, omp_get_max_threads() / static_cast<int>(threads));
#endif
  std::mutex m;
  std::size_t next = 0;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&] {
#ifdef _OPENMP
      omp_set_num_threads(inner);
#endif
      for (;;) {
        std::size_t i;
        {
          std::lock_guard lock(m);
          if (next >= n) return;
          i = next++;
        }
        task(i);
      }
    });
  for (auto& th : pool) th.join();
}

/// Shared read-only bases keyed by (L, N).
class BasisCache {
 public:
  const FockBasis& get(int L, int N) {
    std::lock_guard lock(m_);
    auto& slot = bases_[{L, N}];
    if (!slot) slot = std::make_unique<FockBasis>(build_basis(L, N));
    return *slot;
  }

 private:
  std::mutex m_;
  std::map<std::pair<int, int>, std::unique_ptr<FockBasis>> bases_;
};

inline PointOptions point_options(const RunConfig& c) { return {c.lanczos, c.k_points, c.norm_mode}; }

inline PointRecord run_point(const ModelParams& m, const RunConfig& c, BasisCache& cache) {
  const auto start = std::chrono::steady_clock::now();
  PointRecord r;
  r.model = m;
  try {
    r.cavity = c.cavity.for_point(m);
    r.result = evaluate_point(m, r.cavity, cache.get(m.L, m.N), point_options(c));
  } catch (const std::exception& e) {
    r.result.reset();
    r.error = e.what();
  }
  r.seconds = seconds_since(start);
  return r;
}

inline std::vector<PointRecord> run_points(const std::vector<ModelParams>& models, const RunConfig& c,
                                           BasisCache& cache) {
  std::vector<PointRecord> out(models.size());
  parallel_for(models.size(), c.workers, [&](std::size_t i) { out[i] = run_point(models[i], c, cache); });
  return out;
}

/// Scans one group of points (same L and t) for sign changes of the boundary
/// indicator and bisects the lowest one, warm-starting each solve.
inline BoundaryRecord locate_boundary(const std::vector<const PointRecord*>& scan, Axis axis, const RunConfig& c,
                                      BasisCache& cache) {
  const auto start = std::chrono::steady_clock::now();
  BoundaryRecord b;
  const ModelParams base = scan.front()->model;
  b.L = base.L;
  b.t = base.t;
  b.U_s = base.U_s;
  b.axis = axis;
  try {
    std::vector<double> u, d;
    for (const PointRecord* p : scan) {
      if (!p->result) continue;
      u.push_back(p->model.U_l);
      d.push_back(boundary_delta(p->result->axis(axis).structure));
    }
    const auto brackets = sign_change_brackets(u, d);
    b.crossings = static_cast<int>(brackets.size());
    if (brackets.empty()) {
      b.status = "none";
    } else {
      const FockBasis& basis = cache.get(base.L, base.N);
      const PointOptions opt = point_options(c);
      Wavefunction warm;
      auto delta = [&](double ul) {
        ModelParams m = base;
        m.U_l = ul;
        return boundary_delta_at(m, basis, axis, opt, &warm);
      };
      b.bisection = bisect(delta, brackets.front().first, brackets.front().second, boundary_tolerance(base.U_s, base.t));
      b.status = "found";
    }
  } catch (const std::exception& e) {
    b.status = "failed";
    b.error = e.what();
  }
  b.seconds = seconds_since(start);
  return b;
}

inline std::vector<double> sweep_values(const RunConfig& c) { return c.sweep ? c.sweep->values : std::vector<double>{}; }

}  // namespace detail

/// Executes a validated config; no files are written.
inline RunOutcome execute(const RunConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  RunOutcome out;
  out.mode = c.mode;
  detail::BasisCache cache;

  switch (c.mode) {
    case Mode::ground:
    case Mode::observables:
      out.points = detail::run_points({c.model}, c, cache);
      break;
    case Mode::sweep: {
      std::vector<ModelParams> models;
      for (double v : detail::sweep_values(c)) {
        ModelParams m = c.model;
        (c.sweep->parameter == "t" ? m.t : m.U_l) = v;
        models.push_back(m);
      }
      out.points = detail::run_points(models, c, cache);
      break;
    }
    case Mode::phase_diagram:
    case Mode::scaling: {
      // Groups: one per t (phase diagram) or per L (scaling), each a U_l scan.
      std::vector<ModelParams> groups;
      if (c.mode == Mode::phase_diagram) {
        for (double t : c.t_values) {
          ModelParams m = c.model;
          m.t = t;
          groups.push_back(m);
        }
      } else {
        for (int L : c.L_values) {
          ModelParams m = c.model;
          m.L = m.N = L;
          groups.push_back(m);
        }
      }
      const auto values = detail::sweep_values(c);
      std::vector<ModelParams> models;
      for (const auto& g : groups)
        for (double v : values) {
          ModelParams m = g;
          m.U_l = v;
          models.push_back(m);
        }
      out.points = detail::run_points(models, c, cache);
      if (values.empty()) break;
      struct Job {
        std::size_t group;
        Axis axis;
      };
      std::vector<Job> jobs;
      for (std::size_t g = 0; g < groups.size(); ++g)
        for (Axis a : c.boundary_axes) jobs.push_back({g, a});
      out.boundaries.resize(jobs.size());
      detail::parallel_for(jobs.size(), c.workers, [&](std::size_t i) {
        std::vector<const PointRecord*> scan;
        for (std::size_t k = 0; k < values.size(); ++k) scan.push_back(&out.points[jobs[i].group * values.size() + k]);
        out.boundaries[i] = detail::locate_boundary(scan, jobs[i].axis, c, cache);
      });
      if (c.mode == Mode::scaling) {
        std::vector<std::pair<int, double>> crit;
        for (const auto& b : out.boundaries)
          if (b.bisection) crit.emplace_back(b.L, b.bisection->root);
        try {
          out.fit = scaling_fit(crit);
        } catch (const std::exception& e) {
          out.fit_error = std::string("no extrapolation: ") + std::to_string(crit.size()) + " of " +
                          std::to_string(out.boundaries.size()) + " sizes have a crossing (" + e.what() + ")";
        }
      }
      break;
    }
    case Mode::meanfield: {
      const auto values = detail::sweep_values(c);
      out.meanfield.resize(values.size());
      detail::parallel_for(values.size(), c.workers, [&](std::size_t i) {
        const auto t0 = std::chrono::steady_clock::now();
        MeanFieldRecord& r = out.meanfield[i];
        r.U_l = values[i];
        try {
          r.params = meanfield_point(c.model.L, c.model.N, c.model.t, values[i], c.meanfield.abs_delta_tilde,
                                     c.meanfield.kappa);
          r.params.damping = c.meanfield.damping;
          r.params.tolerance = c.meanfield.tolerance;
          r.params.max_iterations = c.meanfield.max_iterations;
          r.solution = mf_solve(r.params);
        } catch (const std::exception& e) {
          r.solution.reset();
          r.error = e.what();
        }
        r.seconds = detail::seconds_since(t0);
      });
      break;
    }
  }
  out.seconds = detail::seconds_since(start);
  return out;
}

// ---------------------------------------------------------------- writers

namespace detail {

/// Shortest round-trip decimal form.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_optional(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

inline std::string csv_row(const PointRecord& r) {
  const auto& m = r.model;
  std::string s = std::to_string(m.L) + "," + std::to_string(m.N) + "," + num(m.t) + "," + num(m.U_s) + "," + num(m.U_l);
  if (r.cavity)
    s += "," + num(r.cavity->G) + "," + num(r.cavity->kappa) + "," + num(r.cavity->delta_tilde);
  else
    s += ",,,";
  if (!r.result) return s + ",,,,,,,,,,,,false";
  const auto& p = *r.result;
  s += "," + num(p.phase.z.theta) + "," + num(p.phase.x.theta) + "," + std::string(to_string(p.phase.label));
  s += "," + num(p.axis(Axis::z).at_zero) + "," + num(p.axis(Axis::z).at_pi);
  s += "," + num(p.axis(Axis::x).at_zero) + "," + num(p.axis(Axis::x).at_pi);
  s += "," + (p.photon ? num(p.photon->photon_number) : std::string());
  s += "," + (p.photon ? csv_optional(p.photon->fluctuation_ratio) : std::string());
  s += "," + num(p.gap) + "," + (p.degenerate ? "true" : "false") + ",true";
  return s;
}

inline std::string csv_row(const MeanFieldRecord& r) {
  const auto& p = r.params;
  std::string s = std::to_string(p.L) + "," + std::to_string(p.N) + "," + num(p.t) + "," + num(r.U_l) + "," +
                  num(p.cavity.G) + "," + num(p.cavity.kappa) + "," + num(p.cavity.delta_tilde);
  if (!r.solution) return s + ",,,,,,,false,";
  const auto& b = r.solution->best;
  int fixed = 0;
  for (const auto& run : r.solution->runs) fixed += run.converged;
  s += "," + num(b.alpha.real()) + "," + num(b.alpha.imag()) + "," + num(std::norm(b.alpha)) + "," +
       num(b.order_parameter) + "," + num(b.energy) + "," + std::to_string(b.iterations) + ",true," +
       std::to_string(fixed);
  return s;
}

inline std::string csv_row(const BoundaryRecord& b) {
  std::string s = std::to_string(b.L) + "," + num(b.t) + "," + num(b.U_s) + "," + to_string(b.axis) + "," + b.status +
                  "," + std::to_string(b.crossings);
  if (b.bisection)
    s += "," + num(b.bisection->root) + "," + num(b.bisection->lo) + "," + num(b.bisection->hi) + "," +
         std::to_string(b.bisection->evaluations);
  else
    s += ",,,,";
  return s;
}

using ojson = nlohmann::ordered_json;

inline ojson model_json(const ModelParams& m) {
  return {{"L", m.L}, {"N", m.N}, {"t", m.t}, {"U_s", m.U_s}, {"U_l", m.U_l}};
}

/// Config of a single point, runnable on its own in mode "observables".
inline ojson point_input(const PointRecord& r, const RunConfig& c) {
  ojson in = {{"mode", "observables"}};
  in.update(model_json(r.model));
  if (r.cavity)
    in["cavity"] = {{"G", r.cavity->G}, {"kappa", r.cavity->kappa}, {"delta_tilde", r.cavity->delta_tilde}};
  in["lanczos"] = c.echo.at("lanczos");
  in["k_points"] = c.k_points;
  in["norm_mode"] = to_string(c.norm_mode);
  in["seed"] = c.lanczos.seed;
  return in;
}

inline ojson point_json(const PointRecord& r, const RunConfig& c) {
  ojson j = {{"input", point_input(r, c)}, {"status", r.result ? "ok" : "failed"}};
  if (!r.result) {
    j["error"] = r.error;
    return j;
  }
  const auto& p = *r.result;
  j["eigenvalues"] = p.eigenvalues;
  j["residual_norms"] = p.residual_norms;
  j["gap"] = p.gap;
  j["degenerate"] = p.degenerate;
  j["iterations"] = p.iterations;
  j["theta_z"] = p.phase.z.theta;
  j["theta_x"] = p.phase.x.theta;
  j["peak_z"] = p.phase.z.height;
  j["peak_x"] = p.phase.x.height;
  j["label"] = to_string(p.phase.label);
  ojson axes = ojson::object();
  for (Axis a : kAxes) {
    const auto& d = p.axis(a);
    axes[to_string(a)] = {{"S_k", d.structure.values},        {"C_r", d.correlations.values},
                          {"S_at_0", d.at_zero},              {"S_at_pi", d.at_pi},
                          {"sum_rule_error", d.sum_rule_error}, {"boundary_delta", boundary_delta(d.structure)}};
  }
  j["axes"] = axes;
  if (p.photon) {
    j["photon"] = {{"n_photon", p.photon->photon_number},
                   {"mean_amplitude", {p.photon->mean_amplitude.real(), p.photon->mean_amplitude.imag()}},
                   {"fluct_ratio", p.photon->fluctuation_ratio ? ojson(*p.photon->fluctuation_ratio) : ojson()}};
    j["photon"]["n_photon_from_sx"] = *p.photon_from_sx;
  }
  return j;
}

inline ojson meanfield_json(const MeanFieldRecord& r) {
  const auto& p = r.params;
  ojson j = {{"input",
              {{"L", p.L}, {"N", p.N}, {"t", p.t}, {"U_l", r.U_l},
               {"cavity", {{"G", p.cavity.G}, {"kappa", p.cavity.kappa}, {"delta_tilde", p.cavity.delta_tilde}}},
               {"damping", p.damping}, {"tolerance", p.tolerance}, {"max_iterations", p.max_iterations}}},
             {"status", r.solution ? "ok" : "failed"}};
  if (!r.solution) {
    j["error"] = r.error;
    return j;
  }
  auto state = [](const MeanFieldState& s) {
    return ojson{{"alpha", {s.alpha.real(), s.alpha.imag()}}, {"alpha_sq", std::norm(s.alpha)},
                 {"order_parameter", s.order_parameter},       {"energy", s.energy},
                 {"iterations", s.iterations},                 {"converged", s.converged},
                 {"residual", s.residual}};
  };
  j["best"] = state(r.solution->best);
  ojson runs = ojson::array();
  for (std::size_t i = 0; i < r.solution->runs.size(); ++i) {
    ojson s = state(r.solution->runs[i]);
    s["seed"] = {r.solution->seeds[i].real(), r.solution->seeds[i].imag()};
    runs.push_back(s);
  }
  j["runs"] = runs;
  return j;
}

inline ojson boundary_json(const BoundaryRecord& b) {
  ojson j = {{"L", b.L}, {"t", b.t}, {"U_s", b.U_s}, {"axis", to_string(b.axis)}, {"status", b.status},
             {"crossings", b.crossings}};
  if (b.bisection)
    j["bisection"] = {{"U_c", b.bisection->root}, {"lo", b.bisection->lo}, {"hi", b.bisection->hi},
                      {"evaluations", b.bisection->evaluations}};
  if (!b.error.empty()) j["error"] = b.error;
  return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << text;
  f.close();
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

template <class Records>
std::string csv(const char* header, const Records& rows) {
  std::string s = std::string(header) + "\r\n";
  for (const auto& r : rows) s += csv_row(r) + "\r\n";
  return s;
}

}  // namespace detail

/// Writes the CSV tables, a deterministic summary.json and a separate timing.json.
inline std::vector<std::string> write_results(RunOutcome& out, const RunConfig& c, const std::filesystem::path& dir) {
  using detail::ojson;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  std::vector<std::string> files;
  auto emit = [&](const std::string& name, const std::string& text) {
    detail::write_text(dir / name, text);
    files.push_back(name);
  };

  ojson summary = {{"version", kVersion}, {"config", c.echo}};
  ojson timing = {{"version", kVersion}, {"total_seconds", out.seconds}};
  if (c.mode == Mode::meanfield) {
    emit("meanfield.csv", detail::csv(kMeanFieldHeader, out.meanfield));
    ojson recs = ojson::array(), secs = ojson::array();
    for (const auto& r : out.meanfield) {
      recs.push_back(detail::meanfield_json(r));
      secs.push_back(r.seconds);
    }
    summary["records"] = recs;
    timing["point_seconds"] = secs;
  } else {
    emit("results.csv", detail::csv(kResultsHeader, out.points));
    summary["k_grid"] = default_k_grid(c.k_points);
    ojson recs = ojson::array(), secs = ojson::array();
    for (const auto& r : out.points) {
      recs.push_back(detail::point_json(r, c));
      secs.push_back(r.seconds);
    }
    summary["records"] = recs;
    timing["point_seconds"] = secs;
  }
  if (c.mode == Mode::phase_diagram || c.mode == Mode::scaling) {
    emit("boundaries.csv", detail::csv(kBoundariesHeader, out.boundaries));
    ojson b = ojson::array(), secs = ojson::array();
    for (const auto& r : out.boundaries) {
      b.push_back(detail::boundary_json(r));
      secs.push_back(r.seconds);
    }
    summary["boundaries"] = b;
    timing["boundary_seconds"] = secs;
  }
  if (c.mode == Mode::scaling) {
    if (out.fit)
      summary["scaling_fit"] = {{"a", out.fit->a}, {"b", out.fit->b}, {"c", out.fit->c}, {"residual", out.fit->residual}};
    else
      summary["scaling_fit"] = {{"error", out.fit_error}};
  }
  summary["failed_points"] = out.failed_points();
  summary["exit_code"] = out.exit_code();
  emit("summary.json", summary.dump(2) + "\n");
  emit("timing.json", timing.dump(2) + "\n");
  out.files = files;
  return files;
}

}  // namespace cavmag
