#pragma once
// Scenario execution and report emission.  A run is deterministic given the
// scenario text and seed: record times land exactly, the random batch is
// seeded, and numbers are serialized shortest-round-trip, so repeated runs
// produce byte-identical JSON up to the timestamp field.

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "harnacklab/entropy.hpp"
#include "harnacklab/errors.hpp"
#include "harnacklab/geometry.hpp"
#include "harnacklab/harnack.hpp"
#include "harnacklab/heat_family.hpp"
#include "harnacklab/oracles.hpp"
#include "harnacklab/path_action.hpp"
#include "harnacklab/ricci_flow.hpp"
#include "harnacklab/scenario.hpp"

namespace harnacklab {

using json = nlohmann::ordered_json;

struct RunOptions {
  std::string out_dir = ".";          ///< base for relative output paths
  std::optional<std::string> json_path;  ///< override scenario output.json
  std::optional<bool> plots;
  std::optional<std::uint64_t> seed;
  std::vector<int> refine;            ///< override checks.residual_levels
};

struct SeriesTable {
  std::vector<double> taus, ts;
  std::vector<std::pair<std::string, std::vector<double>>> max_h;
  std::vector<double> F, W, mass, pairing;
};

struct RunOutcome {
  std::string name;
  json report;
  int exit_code = 0;
  SeriesTable series;
  std::vector<std::string> written;  ///< files produced by emit_report
};

namespace detail {

inline std::string fmt_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline ScalarField build_dof0(const Scenario& s, const ManifoldSpec& spec) {
  if (spec.kind == ManifoldKind::RoundSphere)
    return ScalarField::Constant(1, s.r0);
  const std::size_t count = spec.node_count();
  ScalarField phi = ScalarField::Zero(count);
  if (s.phi0.kind == "constant") {
    phi = ScalarField::Constant(count, s.phi0.amp);
  } else if (s.phi0.kind == "sine2d") {
    const int N = spec.grid;
    const double k = 2.0 * std::numbers::pi / spec.length;
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < N; ++i)
        phi[static_cast<std::size_t>(j) * N + i] =
            s.phi0.amp * std::sin(k * spec.x_of(i)) * std::sin(k * spec.y_of(j));
  } else if (s.phi0.kind == "cos_theta") {
    for (std::size_t i = 0; i < count; ++i)
      phi[i] = s.phi0.amp * std::cos(spec.theta_of(static_cast<int>(i)));
  }
  return phi;
}

inline ScalarField build_profile(const InitSpec& init, const MetricState& m) {
  const ManifoldSpec& spec = m.spec;
  const std::size_t count = spec.node_count();
  if (init.kind == "delta") return init_near_delta(m, init.a, init.b, init.c);
  if (init.kind == "constant") return ScalarField::Constant(count, init.a);
  // offset_sine
  ScalarField f = ScalarField::Constant(count, init.a);
  if (spec.kind == ManifoldKind::ConformalTorus2D) {
    const int N = spec.grid;
    const double k = 2.0 * std::numbers::pi / spec.length;
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < N; ++i)
        f[static_cast<std::size_t>(j) * N + i] +=
            init.b * std::sin(k * spec.x_of(i)) * std::sin(k * spec.y_of(j));
  } else if (spec.kind == ManifoldKind::RotSymSphere2D) {
    for (std::size_t i = 0; i < count; ++i)
      f[i] += init.b * std::cos(spec.theta_of(static_cast<int>(i)));
  }
  require((f > 0.0).all(), "initial data must be strictly positive");
  return f;
}

inline json location_json(const ManifoldSpec& spec, double tau,
                          const NodeLocation& loc) {
  json j;
  j["tau"] = tau;
  if (spec.kind == ManifoldKind::ConformalTorus2D) {
    j["x"] = loc.a;
    j["y"] = loc.b;
  } else if (spec.kind == ManifoldKind::RotSymSphere2D) {
    j["theta"] = loc.a;
  }
  return j;
}

inline int exit_of_status(const std::string& status) {
  if (status == "pass" || status == "informational") return 0;
  if (status == "error") return 1;
  return 2;  // fail or hypotheses-unmet
}

}  // namespace detail

/// Execute one validated scenario.  Per-check failures are recorded in the
/// report rather than thrown; only setup-level errors (geometry, solver
/// blow-up) propagate to the caller.
inline RunOutcome run_scenario(const Scenario& scenario,
                               const RunOptions& opt = {}) {
  Scenario s = scenario;
  if (opt.seed) s.seed = *opt.seed;
  if (!opt.refine.empty() && !s.residual_presets.empty())
    s.residual_levels = opt.refine;
  validate_scenario(s);

  RunOutcome out;
  out.name = s.name;
  json& rep = out.report;
  rep["schema"] = 1;
  rep["name"] = s.name;
  rep["seed"] = s.seed;
  rep["timestamp"] = detail::timestamp_utc();
  rep["checks"] = json::array();

  const ManifoldSpec spec = s.manifold();
  const ScalarField dof0 = detail::build_dof0(s, spec);
  const FlowTrajectory traj = evolve(spec, dof0, s.T, s.tau0, s.steps);

  LogSolution sol;
  const bool solved = s.needs_solution();
  if (solved) {
    const MetricState m0 = state_at(traj, traj.span());
    const ScalarField f0 = detail::build_profile(s.init, m0);
    sol = solve_backward(traj, s.c, f0, s.effective_tau_end(), s.records);
    out.series.taus = sol.taus;
    out.series.ts.reserve(sol.records());
    for (double tau : sol.taus) out.series.ts.push_back(s.T - tau);
  }

  int exit_code = 0;
  auto push_check = [&](json j) {
    exit_code = std::max(
        exit_code, detail::exit_of_status(j["status"].get<std::string>()));
    rep["checks"].push_back(std::move(j));
  };
  // keeps the per-check schema stable even when evaluation itself throws
  auto fill_error = [](json& j, const char* what) {
    j["status"] = "error";
    j["pass"] = false;
    j["worst_value"] = nullptr;
    j["worst_location"] = nullptr;
    j["tolerance"] = nullptr;
    j["error"] = what;
  };

  for (const std::string& name : s.presets) {
    json j;
    j["name"] = "nonpositivity:" + name;
    j["kind"] = "nonpositivity";
    try {
      HarnackParams p = preset(name);
      json details;
      if (name == "TYPE1_2R" || name == "TYPE1_CHE") {
        const double d0 = choose_type1_d(p, sol);
        p = with_type1_d(p, d0);
        const TypeIBound bound = type_one_bound(traj);
        details["chosen_d"] = d0;
        details["chosen_d_source"] = "artifact-chosen";
        details["curvature_bound_d0"] = bound.d0;
        details["rm_normalization"] = bound.rm_normalization;
      }
      const NonpositivityReport r = check_nonpositivity(p, sol, traj, s.tolerance);
      j["status"] = r.status;
      j["pass"] = r.status == "pass" || r.status == "informational";
      j["worst_value"] = r.worst_value;
      j["worst_location"] =
          detail::location_json(spec, r.worst_tau, r.worst_node);
      j["tolerance"] = r.tolerance;
      details["hypotheses"] = json::array();
      for (const auto& h : r.hypotheses)
        details["hypotheses"].push_back(
            {{"name", h.name}, {"satisfied", h.satisfied}, {"value", h.value}});
      j["details"] = std::move(details);
      out.series.max_h.emplace_back(name, r.max_H);
    } catch (const Error& e) {
      fill_error(j, e.what());
    }
    push_check(std::move(j));
  }

  for (EntropyKind kind : s.entropy) {
    json j;
    j["name"] = "entropy:" + to_string(kind);
    j["kind"] = "entropy";
    try {
      const EntropyValue e = eval_entropy(kind, sol, traj);
      const MonotonicityReport mono = monotonicity_report(e, s.entropy_tolerance);
      const bool unmet = !e.r_nonnegative;
      j["status"] = unmet ? "hypotheses-unmet" : (mono.pass ? "pass" : "fail");
      j["pass"] = !unmet && mono.pass;
      j["worst_value"] = mono.worst_slope;
      j["worst_location"] = {{"t", mono.worst_t}};
      j["tolerance"] = mono.threshold;
      j["details"] = {{"min_R_initial", e.min_R_initial},
                      {"min_R_over_run", e.min_R_over_run},
                      {"final_value", e.values.front()},
                      {"worst_step", mono.worst_step}};
      if (kind == EntropyKind::F) out.series.F = e.values;
      else out.series.W = e.values;
    } catch (const Error& e) {
      fill_error(j, e.what());
    }
    push_check(std::move(j));
  }

  if (s.mass) {
    json j;
    j["name"] = "mass";
    j["kind"] = "conservation";
    std::vector<double> series;
    series.reserve(sol.records());
    for (std::size_t k = 0; k < sol.records(); ++k)
      series.push_back(integrate(sol.fs[k], sol.state(k)));
    double drift = 0.0;
    for (double v : series)
      drift = std::max(drift, std::abs(v - series.front()));
    drift /= std::abs(series.front());
    j["status"] = drift <= s.mass_tolerance ? "pass" : "fail";
    j["pass"] = drift <= s.mass_tolerance;
    j["worst_value"] = drift;
    j["worst_location"] = nullptr;
    j["tolerance"] = s.mass_tolerance;
    out.series.mass = std::move(series);
    push_check(std::move(j));
  }

  if (s.pairing) {
    json j;
    j["name"] = "pairing";
    j["kind"] = "conservation";
    try {
      const std::size_t rec = sol.records();
      std::vector<double> rev_ts(rec);
      for (std::size_t k = 0; k < rec; ++k)
        rev_ts[k] = s.T - sol.taus[rec - 1 - k];
      const MetricState m_first = sol.state(rec - 1);
      const ScalarField h0 = detail::build_profile(s.pairing_init, m_first);
      const HeatSeries heat = solve_forward_heat(traj, h0, rev_ts);
      std::vector<double> series(rec);
      for (std::size_t k = 0; k < rec; ++k) {
        const std::size_t kf = rec - 1 - k;  // backward record at the same t
        series[k] = integrate(heat.fields[k] * sol.fs[kf], sol.state(kf));
      }
      double drift = 0.0;
      for (double v : series)
        drift = std::max(drift, std::abs(v - series.front()));
      drift /= std::abs(series.front());
      j["status"] = drift <= s.mass_tolerance ? "pass" : "fail";
      j["pass"] = drift <= s.mass_tolerance;
      j["worst_value"] = drift;
      j["worst_location"] = nullptr;
      j["tolerance"] = s.mass_tolerance;
      // store aligned to the backward records (descending t)
      std::vector<double> aligned(rec);
      for (std::size_t k = 0; k < rec; ++k) aligned[k] = series[rec - 1 - k];
      out.series.pairing = std::move(aligned);
    } catch (const Error& e) {
      fill_error(j, e.what());
    }
    push_check(std::move(j));
  }

  if (!s.pairs.empty() || s.paths_random > 0) {
    json j;
    j["name"] = "integrated";
    j["kind"] = "integrated";
    try {
      std::vector<std::array<double, 6>> pairs;
      for (const auto& p : s.pairs)
        pairs.push_back({p.x1, p.y1, p.tau1, p.x2, p.y2, p.tau2});
      const VelocityWeight weight = weight_for_coupling(s.c);
      const IntegratedReport r =
          verify_integrated(sol, traj, pairs, weight, s.paths_random,
                            s.path_segments, s.seed);
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& pc : r.pairs) worst = std::min(worst, pc.margin);
      if (r.batch.count > 0) worst = std::min(worst, r.batch.worst_margin);
      j["status"] = r.pass ? "pass" : "fail";
      j["pass"] = r.pass;
      j["worst_value"] = worst;
      j["worst_location"] = nullptr;
      j["tolerance"] = r.tolerance;
      json details;
      details["weight"] = to_string(r.weight);
      details["forms_agree"] = r.forms_agree;
      details["pairs"] = json::array();
      for (const auto& pc : r.pairs)
        details["pairs"].push_back({{"tau1", pc.tau1},
                                    {"tau2", pc.tau2},
                                    {"gamma_hat", pc.gamma_hat},
                                    {"converged", pc.converged},
                                    {"margin", pc.margin},
                                    {"margin_alt", pc.margin_alt},
                                    {"pass", pc.pass}});
      details["random_paths"] = {{"count", r.batch.count},
                                 {"worst_margin", r.batch.worst_margin},
                                 {"worst_index", r.batch.worst_index},
                                 {"pass", r.batch.pass}};
      j["details"] = std::move(details);
    } catch (const Error& e) {
      fill_error(j, e.what());
    }
    push_check(std::move(j));
  }

  for (const std::string& name : s.residual_presets) {
    json j;
    j["name"] = "residual:" + name;
    j["kind"] = "residual";
    try {
      const HarnackParams p = preset(name);
      // levels re-run the scenario at each grid with the preset's own
      // coupling; stepping stays adaptive so coarse-grid step sizes never
      // leak into fine grids
      auto make_case = [&](int grid) {
        Scenario level = s;
        level.grid = grid;
        level.steps = 0;
        level.c = p.c;
        const ManifoldSpec lspec = level.manifold();
        const ScalarField ldof0 = detail::build_dof0(level, lspec);
        const FlowTrajectory ltraj =
            evolve(lspec, ldof0, level.T, level.tau0, 0);
        const MetricState lm0 = state_at(ltraj, ltraj.span());
        const ScalarField lf0 = detail::build_profile(level.init, lm0);
        return solve_backward(ltraj, level.c, lf0, level.effective_tau_end(),
                              level.records);
      };
      const ResidualStudy study =
          residual_study(p, RhsForm::Expanded, s.residual_levels, make_case);
      const bool ok = study.order_defined && study.order >= 1.8;
      j["status"] = ok ? "pass" : "fail";
      j["pass"] = ok;
      j["worst_value"] = study.order;  // NaN serializes as null
      j["worst_location"] = nullptr;
      j["tolerance"] = 1.8;
      json levels = json::array();
      for (const auto& lv : study.levels)
        levels.push_back({{"grid", lv.grid}, {"err", lv.err}});
      j["details"] = {{"levels", std::move(levels)},
                      {"order_defined", study.order_defined}};
    } catch (const Error& e) {
      fill_error(j, e.what());
    }
    push_check(std::move(j));
  }

  if (s.li_yau) {
    json j;
    j["name"] = "li_yau";
    j["kind"] = "baseline";
    const LiYauReport r = li_yau_check(FlatSpec{}, 0.0, s.li_lo, s.li_hi,
                                       s.li_grid, s.li_samples);
    j["status"] = r.pass ? "pass" : "fail";
    j["pass"] = r.pass;
    j["worst_value"] = r.min_q;
    j["worst_location"] = {{"t", r.worst_t}, {"x", r.worst_x}};
    j["tolerance"] = r.tolerance;
    push_check(std::move(j));
  }

  rep["exit_status"] = exit_code;
  out.exit_code = exit_code;
  return out;
}

namespace detail {

inline void write_csv(const std::string& path, const SeriesTable& t) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write CSV file '" + path + "'");
  out << "tau,t";
  for (const auto& [name, series] : t.max_h) out << ",max_H_" << name;
  out << ",F,W,mass,pairing\n";
  auto cell = [&](const std::vector<double>& v, std::size_t k) {
    out << ',';
    if (k < v.size()) out << fmt_double(v[k]);
  };
  // no backward solution means no rows: the file stays header-only
  for (std::size_t k = 0; k < t.taus.size(); ++k) {
    out << fmt_double(t.taus[k]) << ',' << fmt_double(t.ts[k]);
    for (const auto& [name, series] : t.max_h) cell(series, k);
    cell(t.F, k);
    cell(t.W, k);
    cell(t.mass, k);
    cell(t.pairing, k);
    out << '\n';
  }
}

// minimal standalone line plot; axes are implied by the printed ranges
inline void write_svg(const std::string& path, const std::string& title,
                      const std::vector<double>& xs,
                      const std::vector<std::pair<std::string, std::vector<double>>>& ys) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write plot file '" + path + "'");
  const int W = 720, H = 420, M = 50;
  double xmin = xs.front(), xmax = xs.back();
  if (xmin > xmax) std::swap(xmin, xmax);
  double ymin = 0.0, ymax = 0.0;
  bool first = true;
  for (const auto& [name, v] : ys)
    for (std::size_t k = 0; k < v.size() && k < xs.size(); ++k) {
      if (first || v[k] < ymin) ymin = v[k];
      if (first || v[k] > ymax) ymax = v[k];
      first = false;
    }
  if (!(ymax > ymin)) ymax = ymin + 1.0;
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                 "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  char buf[160];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf,
                "<text x=\"%d\" y=\"24\" font-family=\"monospace\" "
                "font-size=\"14\">%s  [x: %.6g..%.6g  y: %.6g..%.6g]</text>\n",
                M, title.c_str(), xmin, xmax, ymin, ymax);
  out << buf;
  std::size_t ci = 0;
  for (const auto& [name, v] : ys) {
    const char* color = colors[ci % 7];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < v.size() && k < xs.size(); ++k) {
      const double px = M + (xs[k] - xmin) / (xmax - xmin) * (W - 2 * M);
      const double py = H - M - (v[k] - ymin) / (ymax - ymin) * (H - 2 * M);
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px, py);
      out << buf;
    }
    out << "\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%d\" y=\"%zu\" font-family=\"monospace\" "
                  "font-size=\"12\" fill=\"%s\">%s</text>\n",
                  W - M - 160, static_cast<std::size_t>(40 + 16 * ci), color,
                  name.c_str());
    out << buf;
    ++ci;
  }
  out << "</svg>\n";
}

}  // namespace detail

/// Write the requested artifacts (JSON report, CSV series, SVG plots) and
/// record their paths in the outcome.
inline void emit_report(RunOutcome& out, const Scenario& s,
                        const RunOptions& opt = {}) {
  namespace fs = std::filesystem;
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    if (path.is_relative()) path = fs::path(opt.out_dir) / path;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    return path.string();
  };

  std::string json_path;
  if (opt.json_path) json_path = *opt.json_path;
  else if (!s.json.empty()) json_path = s.json;
  if (!json_path.empty()) {
    const std::string path = resolve(json_path);
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "cannot write JSON report '" + path + "'");
    f << out.report.dump(2) << '\n';
    out.written.push_back(path);
  }

  if (!s.csv.empty()) {
    const std::string path = resolve(s.csv);
    detail::write_csv(path, out.series);
    out.written.push_back(path);
  }

  const bool plots = opt.plots.value_or(s.plots);
  if (plots && !out.series.taus.empty()) {
    if (!out.series.max_h.empty()) {
      const std::string path = resolve(s.name + "_max_H.svg");
      detail::write_svg(path, s.name + ": max H over nodes vs tau",
                        out.series.taus, out.series.max_h);
      out.written.push_back(path);
    }
    std::vector<std::pair<std::string, std::vector<double>>> ent;
    if (!out.series.F.empty()) ent.emplace_back("F", out.series.F);
    if (!out.series.W.empty()) ent.emplace_back("W", out.series.W);
    if (!ent.empty()) {
      const std::string path = resolve(s.name + "_entropy.svg");
      detail::write_svg(path, s.name + ": entropy vs tau", out.series.taus, ent);
      out.written.push_back(path);
    }
    std::vector<std::pair<std::string, std::vector<double>>> cons;
    if (!out.series.mass.empty()) cons.emplace_back("mass", out.series.mass);
    if (!out.series.pairing.empty())
      cons.emplace_back("pairing", out.series.pairing);
    if (!cons.empty()) {
      const std::string path = resolve(s.name + "_conservation.svg");
      detail::write_svg(path, s.name + ": conserved integrals vs tau",
                        out.series.taus, cons);
      out.written.push_back(path);
    }
  }
}

/// Run every *.cfg under dir (sorted by name) and emit each report.  The
/// HARNACKLAB_THREADS environment variable caps parallelism; outcomes are
/// returned in sorted scenario order regardless of completion order.
inline std::vector<RunOutcome> run_suite(const std::string& dir,
                                         const RunOptions& opt = {}) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir), "suite path is not a directory: '" + dir + "'");
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".cfg")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  require(!files.empty(), "no .cfg scenarios under '" + dir + "'");

  unsigned threads = std::thread::hardware_concurrency();
  if (threads == 0) threads = 1;
  if (const char* cap = std::getenv("HARNACKLAB_THREADS")) {
    const long v = std::strtol(cap, nullptr, 10);
    if (v >= 1) threads = static_cast<unsigned>(v);
  }
  threads = std::min<unsigned>(threads, files.size());

  std::vector<RunOutcome> outcomes(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= outcomes.size()) return;
      RunOutcome& out = outcomes[i];
      try {
        const Scenario s = load_scenario(files[i]);
        out = run_scenario(s, opt);
        emit_report(out, s, opt);
      } catch (const std::exception& e) {
        out.name = fs::path(files[i]).stem().string();
        out.report = json{{"schema", 1},
                          {"name", out.name},
                          {"error", e.what()},
                          {"exit_status", 1}};
        out.exit_code = 1;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return outcomes;
}

}  // namespace harnacklab
