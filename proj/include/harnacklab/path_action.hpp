#pragma once
// Space-time action Gamma = integral of (weight |path velocity|^2_g + R) dt
// along piecewise-linear paths, its minimization, and the integrated
// two-point inequalities it certifies.
//
// Paths live in unwrapped coordinates (the torus universal cover), so a
// path may wind; the minimizer scans the nine nearest end images and keeps
// the best, which bounds the winding-class gap at this scale.  Every
// quadrature weight and interpolation rule below is differentiated exactly,
// so the descent gradient is the true gradient of the discrete functional.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "harnacklab/errors.hpp"
#include "harnacklab/geometry.hpp"
#include "harnacklab/heat_family.hpp"
#include "harnacklab/ricci_flow.hpp"

namespace harnacklab {

enum class VelocityWeight { Half, One };

inline double weight_value(VelocityWeight w) {
  return w == VelocityWeight::Half ? 0.5 : 1.0;
}

inline std::string to_string(VelocityWeight w) {
  return w == VelocityWeight::Half ? "half" : "one";
}

/// Each coupling has its own inequality form: c = -2 pairs with the half
/// weight and bound e^Gamma, c = -1 with the unit weight and e^{Gamma/2}.
inline VelocityWeight weight_for_coupling(double c) {
  if (c == -2.0) return VelocityWeight::Half;
  if (c == -1.0) return VelocityWeight::One;
  throw ConfigError("no integrated inequality for coupling c = " +
                    std::to_string(c));
}

/// Piecewise-linear space-time path, samples ordered by increasing t.
/// Coordinates are unwrapped; only (xs) is used on the 1D backends.
struct SpaceTimePath {
  std::vector<double> ts;
  std::vector<double> xs;
  std::vector<double> ys;

  std::size_t nodes() const { return ts.size(); }

  void validate(const FlowTrajectory& traj) const {
    require(ts.size() >= 2, "path needs at least two samples");
    require(xs.size() == ts.size() && ys.size() == ts.size(),
            "path coordinate arrays must match the time array");
    for (std::size_t k = 1; k < ts.size(); ++k)
      require(ts[k] > ts[k - 1], "path times must be strictly increasing");
    const double slack = 1e-12 * (1.0 + traj.T);
    require(ts.front() >= -slack && ts.back() <= traj.span() + slack,
            "path leaves the trajectory time range");
  }
};

struct ActionValue {
  double gamma = 0.0;
  VelocityWeight weight = VelocityWeight::Half;
  SpaceTimePath path;
  bool converged = true;   ///< minimize_action only; plain action is exact
  int iterations = 0;
  double grad_norm = 0.0;
};

namespace detail {

// conformal factor and scalar curvature grids frozen at one path-node time
struct PathNodeMetric {
  ScalarField conf;
  ScalarField curv;
};

inline std::vector<PathNodeMetric> metrics_along(const FlowTrajectory& traj,
                                                 const std::vector<double>& ts) {
  MetricPath path(traj);
  std::vector<PathNodeMetric> out;
  out.reserve(ts.size());
  for (double t : ts) {
    const auto m = path.at(t);
    out.push_back({m->conf, m->scalar_curv});
  }
  return out;
}

struct FieldSample {
  double value = 0.0;
  double dx = 0.0;
  double dy = 0.0;
};

// bilinear sample with the exact in-cell derivative; periodic in both axes
inline FieldSample sample_torus(const ScalarField& f, const ManifoldSpec& spec,
                                double x, double y) {
  const int N = spec.grid;
  const double h = spec.spacing();
  const double gx = x / h, gy = y / h;
  const double fx0 = std::floor(gx), fy0 = std::floor(gy);
  const double ax = gx - fx0, ay = gy - fy0;
  auto wrap = [N](double v) {
    int i = static_cast<int>(v) % N;
    return i < 0 ? i + N : i;
  };
  const int i0 = wrap(fx0), i1 = wrap(fx0 + 1.0);
  const int j0 = wrap(fy0), j1 = wrap(fy0 + 1.0);
  const double c00 = f[static_cast<std::size_t>(j0) * N + i0];
  const double c10 = f[static_cast<std::size_t>(j0) * N + i1];
  const double c01 = f[static_cast<std::size_t>(j1) * N + i0];
  const double c11 = f[static_cast<std::size_t>(j1) * N + i1];
  FieldSample s;
  s.value = c00 * (1 - ax) * (1 - ay) + c10 * ax * (1 - ay) +
            c01 * (1 - ax) * ay + c11 * ax * ay;
  s.dx = ((c10 - c00) * (1 - ay) + (c11 - c01) * ay) / h;
  s.dy = ((c01 - c00) * (1 - ax) + (c11 - c10) * ax) / h;
  return s;
}

// linear sample in theta, clamped at the pole-adjacent nodes
inline FieldSample sample_polar(const ScalarField& f, const ManifoldSpec& spec,
                                double theta) {
  const int N = spec.grid;
  const double h = spec.spacing();
  const double g = theta / h - 0.5;
  FieldSample s;
  if (g <= 0.0) {
    s.value = f[0];
    return s;
  }
  if (g >= N - 1.0) {
    s.value = f[N - 1];
    return s;
  }
  const int i0 = static_cast<int>(g);
  const double a = g - i0;
  s.value = f[i0] * (1 - a) + f[i0 + 1] * a;
  s.dx = (f[i0 + 1] - f[i0]) / h;
  return s;
}

inline FieldSample sample_field(const ScalarField& f, const ManifoldSpec& spec,
                                double x, double y) {
  switch (spec.kind) {
    case ManifoldKind::RoundSphere:
      return {f[0], 0.0, 0.0};
    case ManifoldKind::ConformalTorus2D:
      return sample_torus(f, spec, x, y);
    case ManifoldKind::RotSymSphere2D:
      return sample_polar(f, spec, x);
  }
  return {};
}

struct PathEval {
  double gamma = 0.0;
  std::vector<double> gx, gy;  ///< gradient at every node (ends included)
};

// Gamma and, optionally, its exact gradient for fixed node times.
// Per segment j: dt [ w (C_j + C_{j+1})/2 |dp|^2/dt^2 + (R_j + R_{j+1})/2 ].
inline PathEval eval_path(const ManifoldSpec& spec,
                          const std::vector<PathNodeMetric>& nm,
                          const std::vector<double>& ts,
                          const std::vector<double>& xs,
                          const std::vector<double>& ys, double w,
                          bool want_grad) {
  const std::size_t K = ts.size() - 1;
  PathEval ev;
  if (want_grad) {
    ev.gx.assign(K + 1, 0.0);
    ev.gy.assign(K + 1, 0.0);
  }
  std::vector<FieldSample> C(K + 1), R(K + 1);
  for (std::size_t k = 0; k <= K; ++k) {
    C[k] = sample_field(nm[k].conf, spec, xs[k], ys[k]);
    R[k] = sample_field(nm[k].curv, spec, xs[k], ys[k]);
  }
  for (std::size_t j = 0; j < K; ++j) {
    const double dt = ts[j + 1] - ts[j];
    const double dx = xs[j + 1] - xs[j];
    const double dy = ys[j + 1] - ys[j];
    const double D = dx * dx + dy * dy;
    const double Csum = C[j].value + C[j + 1].value;
    ev.gamma += (w / (2.0 * dt)) * Csum * D +
                (dt / 2.0) * (R[j].value + R[j + 1].value);
    if (!want_grad) continue;
    const double kin = w / (2.0 * dt);
    // endpoint j
    ev.gx[j] += kin * (Csum * (-2.0 * dx) + D * C[j].dx) + (dt / 2.0) * R[j].dx;
    ev.gy[j] += kin * (Csum * (-2.0 * dy) + D * C[j].dy) + (dt / 2.0) * R[j].dy;
    // endpoint j+1
    ev.gx[j + 1] +=
        kin * (Csum * (2.0 * dx) + D * C[j + 1].dx) + (dt / 2.0) * R[j + 1].dx;
    ev.gy[j + 1] +=
        kin * (Csum * (2.0 * dy) + D * C[j + 1].dy) + (dt / 2.0) * R[j + 1].dy;
  }
  return ev;
}

}  // namespace detail

/// Action of a given path under the stored flow; trapezoidal in t with the
/// segment velocity measured in the metric at both segment endpoints.
inline ActionValue action(const SpaceTimePath& path, const FlowTrajectory& traj,
                          VelocityWeight weight) {
  path.validate(traj);
  const auto nm = detail::metrics_along(traj, path.ts);
  const auto ev = detail::eval_path(traj.spec, nm, path.ts, path.xs, path.ys,
                                    weight_value(weight), false);
  ActionValue av;
  av.gamma = ev.gamma;
  av.weight = weight;
  av.path = path;
  return av;
}

/// Gradient descent over the interior nodes of a K-segment path between
/// (x1, t1) and (x2, t2), t1 < t2, initialized as the constant-speed chord.
/// On the torus the nine nearest periodic images of the far endpoint are
/// scanned and the best minimum kept.  Gamma-hat is an upper bound for the
/// true infimum by construction; non-convergence is flagged, never hidden.
inline ActionValue minimize_action(const FlowTrajectory& traj,
                                   VelocityWeight weight, double x1, double y1,
                                   double t1, double x2, double y2, double t2,
                                   int segments = 64, int max_iters = 10000,
                                   double grad_tol = 1e-8) {
  require(segments >= 1, "minimize_action: need at least one segment");
  require(t1 < t2, "minimize_action: need t1 < t2");
  const ManifoldSpec& spec = traj.spec;
  const std::size_t K = static_cast<std::size_t>(segments);

  std::vector<double> ts(K + 1);
  for (std::size_t k = 0; k <= K; ++k)
    ts[k] = (k == K) ? t2 : t1 + (t2 - t1) * static_cast<double>(k) / K;

  SpaceTimePath probe;
  probe.ts = ts;
  probe.xs.assign(K + 1, 0.0);
  probe.ys.assign(K + 1, 0.0);
  probe.validate(traj);

  const auto nm = detail::metrics_along(traj, ts);
  const double w = weight_value(weight);

  if (spec.kind == ManifoldKind::RoundSphere) {
    // homogeneous: every path is constant in space, only the R term remains
    const auto ev = detail::eval_path(spec, nm, ts, probe.xs, probe.ys, w, false);
    ActionValue av;
    av.gamma = ev.gamma;
    av.weight = weight;
    av.path = probe;
    return av;
  }

  std::vector<std::array<double, 2>> images;
  if (spec.kind == ManifoldKind::ConformalTorus2D) {
    const double L = spec.length;
    const double bx = x2 - L * std::floor((x2 - x1) / L + 0.5);  // nearest image
    const double by = y2 - L * std::floor((y2 - y1) / L + 0.5);
    for (int mx = -1; mx <= 1; ++mx)
      for (int my = -1; my <= 1; ++my)
        images.push_back({bx + mx * L, by + my * L});
  } else {
    images.push_back({x2, 0.0});
    y1 = 0.0;
  }

  ActionValue best;
  best.gamma = std::numeric_limits<double>::infinity();
  best.weight = weight;

  for (const auto& img : images) {
    std::vector<double> xs(K + 1), ys(K + 1);
    for (std::size_t k = 0; k <= K; ++k) {
      const double s = static_cast<double>(k) / K;
      xs[k] = x1 + s * (img[0] - x1);
      ys[k] = y1 + s * (img[1] - y1);
    }
    auto ev = detail::eval_path(spec, nm, ts, xs, ys, w, true);
    double conf_scale = 0.0;
    for (const auto& m : nm) conf_scale = std::max(conf_scale, m.conf.maxCoeff());
    double step = 0.25 * (t2 - t1) / (K * w * conf_scale);
    int iters = 0;
    bool converged = false;
    double gnorm = 0.0;
    while (iters < max_iters) {
      gnorm = 0.0;
      double gsq = 0.0;
      for (std::size_t k = 1; k < K; ++k) {
        gnorm = std::max({gnorm, std::abs(ev.gx[k]), std::abs(ev.gy[k])});
        gsq += ev.gx[k] * ev.gx[k] + ev.gy[k] * ev.gy[k];
      }
      if (gnorm <= grad_tol) {
        converged = true;
        break;
      }
      bool accepted = false;
      for (int back = 0; back < 60; ++back) {
        std::vector<double> cx = xs, cy = ys;
        for (std::size_t k = 1; k < K; ++k) {
          cx[k] -= step * ev.gx[k];
          cy[k] -= step * ev.gy[k];
        }
        if (spec.kind == ManifoldKind::RotSymSphere2D)
          for (std::size_t k = 1; k < K; ++k)
            cx[k] = std::clamp(cx[k], 0.0, std::numbers::pi);
        const auto cev = detail::eval_path(spec, nm, ts, cx, cy, w, true);
        if (cev.gamma <= ev.gamma - 1e-4 * step * gsq) {
          xs = std::move(cx);
          ys = std::move(cy);
          ev = cev;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      ++iters;
      if (!accepted) break;  // line search exhausted; report best-so-far
      step *= 2.0;
    }
    if (ev.gamma < best.gamma) {
      best.gamma = ev.gamma;
      best.path.ts = ts;
      best.path.xs = std::move(xs);
      best.path.ys = std::move(ys);
      best.converged = converged;
      best.iterations = iters;
      best.grad_norm = gnorm;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Integrated two-point inequality
// ---------------------------------------------------------------------------

struct PairCheck {
  double x1 = 0.0, y1 = 0.0, tau1 = 0.0;  ///< later backward time (tau1 > tau2)
  double x2 = 0.0, y2 = 0.0, tau2 = 0.0;
  double u1 = 0.0, u2 = 0.0;
  double gamma_hat = 0.0;
  bool converged = true;
  double margin = 0.0;      ///< bound minus u1 - u2; negative means violation
  double margin_alt = std::numeric_limits<double>::quiet_NaN();
  bool pass = false;
};

struct RandomPathCheck {
  int count = 0;
  double worst_margin = 0.0;
  int worst_index = -1;
  bool pass = true;
};

struct IntegratedReport {
  VelocityWeight weight = VelocityWeight::Half;
  double tolerance = 1e-6;
  std::vector<PairCheck> pairs;
  RandomPathCheck batch;
  bool forms_agree = true;  ///< c = -1 only: both bound forms give one verdict
  bool pass = true;
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) {
  // top 53 bits to a double in [0, 1); identical across platforms
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t nearest_record(const std::vector<double>& taus, double tau) {
  std::size_t best = 0;
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < taus.size(); ++k) {
    const double g = std::abs(taus[k] - tau);
    if (g < gap) {
      gap = g;
      best = k;
    }
  }
  return best;
}

// snap a point to the nearest grid node; returns flat index
inline std::size_t snap_node(const ManifoldSpec& spec, double& x, double& y) {
  switch (spec.kind) {
    case ManifoldKind::RoundSphere:
      x = 0.0;
      y = 0.0;
      return 0;
    case ManifoldKind::ConformalTorus2D: {
      const int N = spec.grid;
      const double h = spec.spacing();
      auto snap1 = [&](double v, int& idx) {
        long i = std::lround(v / h) % N;
        if (i < 0) i += N;
        idx = static_cast<int>(i);
        return h * idx;
      };
      int i = 0, j = 0;
      x = snap1(x, i);
      y = snap1(y, j);
      return static_cast<std::size_t>(j) * N + i;
    }
    case ManifoldKind::RotSymSphere2D: {
      const int N = spec.grid;
      const double h = spec.spacing();
      long i = std::lround(x / h - 0.5);
      i = std::clamp<long>(i, 0, N - 1);
      x = spec.theta_of(static_cast<int>(i));
      y = 0.0;
      return static_cast<std::size_t>(i);
    }
  }
  return 0;
}

// bound minus (u1 - u2) for the primary inequality form of the coupling
inline double inequality_margin(double c, double gamma, double n, double tau1,
                                double tau2, double u1, double u2) {
  const double base = n * std::log(tau1 / tau2) - (u1 - u2);
  return c == -2.0 ? base + gamma : base + 0.5 * gamma;
}

}  // namespace detail

/// Per-pair endpoint inequality (via the minimized action, valid because
/// Gamma-hat only loosens the bound) plus a seeded batch of random
/// piecewise-linear paths checked against the per-path inequality, which
/// holds for every path.  Pair times snap to the nearest records.  For
/// c = -1 both bound forms are evaluated and their verdicts compared.
inline IntegratedReport verify_integrated(
    const LogSolution& sol, const FlowTrajectory& traj,
    const std::vector<std::array<double, 6>>& pairs, VelocityWeight weight,
    int n_random = 100, int segments = 64, std::uint64_t seed = 42,
    double tolerance = 1e-6) {
  require(weight == weight_for_coupling(sol.c),
          "verify_integrated: weight does not match the coupling: c = -2 "
          "pairs with half, c = -1 with one");
  require(n_random >= 0 && segments >= 1,
          "verify_integrated: bad batch parameters");

  IntegratedReport rep;
  rep.weight = weight;
  rep.tolerance = tolerance;
  const double n = sol.spec.n;
  const bool dual_form = (sol.c == -1.0);

  for (const auto& pr : pairs) {
    PairCheck pc;
    // orient so index 1 carries the larger tau
    double ax = pr[0], ay = pr[1], atau = pr[2];
    double bx = pr[3], by = pr[4], btau = pr[5];
    if (atau < btau) {
      std::swap(ax, bx);
      std::swap(ay, by);
      std::swap(atau, btau);
    }
    const std::size_t k1 = detail::nearest_record(sol.taus, atau);
    const std::size_t k2 = detail::nearest_record(sol.taus, btau);
    require(k1 != k2, "verify_integrated: pair times snap to the same record");
    pc.tau1 = sol.taus[k1];
    pc.tau2 = sol.taus[k2];
    pc.x1 = ax; pc.y1 = ay; pc.x2 = bx; pc.y2 = by;
    const std::size_t n1 = detail::snap_node(sol.spec, pc.x1, pc.y1);
    const std::size_t n2 = detail::snap_node(sol.spec, pc.x2, pc.y2);
    pc.u1 = -std::log(sol.fs[k1][static_cast<Eigen::Index>(n1)]);
    pc.u2 = -std::log(sol.fs[k2][static_cast<Eigen::Index>(n2)]);

    // tau1 > tau2 means t1 = T - tau1 < t2 = T - tau2: point 1 starts the path
    const ActionValue av =
        minimize_action(traj, weight, pc.x1, pc.y1, sol.T - pc.tau1, pc.x2,
                        pc.y2, sol.T - pc.tau2, segments);
    pc.gamma_hat = av.gamma;
    pc.converged = av.converged;
    pc.margin = detail::inequality_margin(sol.c, av.gamma, n, pc.tau1, pc.tau2,
                                          pc.u1, pc.u2);
    pc.pass = pc.margin >= -tolerance;
    if (dual_form) {
      const double gamma_half =
          action(av.path, traj, VelocityWeight::Half).gamma;
      pc.margin_alt = n * std::log(pc.tau1 / pc.tau2) - (pc.u1 - pc.u2) +
                      gamma_half;
      if ((pc.margin_alt >= -tolerance) != pc.pass) rep.forms_agree = false;
    }
    rep.pairs.push_back(pc);
    rep.pass = rep.pass && pc.pass;
  }

  // random piecewise-linear paths with nodes on record times: metric grids
  // come straight from the stored records, endpoints snap to grid nodes
  rep.batch.count = n_random;
  if (n_random > 0) {
    require(sol.records() >= 2, "verify_integrated: too few records");
    std::vector<detail::PathNodeMetric> rec_nm;
    rec_nm.reserve(sol.records());
    for (std::size_t k = 0; k < sol.records(); ++k) {
      const MetricState m = sol.state(k);
      rec_nm.push_back({m.conf, m.scalar_curv});
    }
    std::mt19937_64 rng(seed);
    auto pick_index = [&](std::size_t lo, std::size_t hi) {  // inclusive
      return lo + static_cast<std::size_t>(detail::uniform01(rng) *
                                           static_cast<double>(hi - lo + 1));
    };
    const double L = sol.spec.length;
    const double h = sol.spec.spacing();
    bool first = true;
    for (int i = 0; i < n_random; ++i) {
      const std::size_t kA = pick_index(0, sol.records() - 2);
      const std::size_t kB = pick_index(kA + 1, sol.records() - 1);
      const std::size_t gap = kB - kA;
      const std::size_t stride =
          std::max<std::size_t>(1, gap / static_cast<std::size_t>(segments));
      std::vector<std::size_t> recs;
      for (std::size_t k = kA; k < kB; k += stride) recs.push_back(k);
      recs.push_back(kB);

      const std::size_t nodes = recs.size();
      std::vector<double> ts(nodes), xs(nodes), ys(nodes);
      std::vector<detail::PathNodeMetric> nm(nodes);
      for (std::size_t k = 0; k < nodes; ++k) {
        // record kB is the earliest t; reverse so t ascends
        const std::size_t rk = recs[nodes - 1 - k];
        ts[k] = sol.T - sol.taus[rk];
        nm[k] = rec_nm[rk];
        if (sol.spec.kind == ManifoldKind::ConformalTorus2D) {
          xs[k] = L * detail::uniform01(rng);
          ys[k] = L * detail::uniform01(rng);
        } else if (sol.spec.kind == ManifoldKind::RotSymSphere2D) {
          xs[k] = 0.5 * h + (std::numbers::pi - h) * detail::uniform01(rng);
          ys[k] = 0.0;
        }
      }
      // endpoints on grid nodes so u needs no interpolation; the start of
      // the path (largest tau) is point 1
      const std::size_t n1 = detail::snap_node(sol.spec, xs.front(), ys.front());
      const std::size_t n2 = detail::snap_node(sol.spec, xs.back(), ys.back());
      const double tau1 = sol.taus[kB], tau2 = sol.taus[kA];
      const double u1 = -std::log(sol.fs[kB][static_cast<Eigen::Index>(n1)]);
      const double u2 = -std::log(sol.fs[kA][static_cast<Eigen::Index>(n2)]);
      const auto ev = detail::eval_path(sol.spec, nm, ts, xs, ys,
                                        weight_value(weight), false);
      const double margin =
          detail::inequality_margin(sol.c, ev.gamma, n, tau1, tau2, u1, u2);
      if (first || margin < rep.batch.worst_margin) {
        rep.batch.worst_margin = margin;
        rep.batch.worst_index = i;
        first = false;
      }
      if (dual_form) {
        const auto ev_half = detail::eval_path(sol.spec, nm, ts, xs, ys,
                                               weight_value(VelocityWeight::Half),
                                               false);
        const double alt = n * std::log(tau1 / tau2) - (u1 - u2) + ev_half.gamma;
        if ((alt >= -tolerance) != (margin >= -tolerance))
          rep.forms_agree = false;
      }
    }
    rep.batch.pass = rep.batch.count == 0 || rep.batch.worst_margin >= -tolerance;
    rep.pass = rep.pass && rep.batch.pass;
  }
  rep.pass = rep.pass && rep.forms_agree;
  return rep;
}

}  // namespace harnacklab
