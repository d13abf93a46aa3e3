#pragma once
// Solvers for the coupled heat family on an evolving metric.
//
// Backward variable: tau, increasing away from the final time T, with
// t = T - tau.  The solution field f stays strictly positive; that is a
// runtime contract checked at every record, not an assumption.

#include <Eigen/Core>

#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "harnacklab/errors.hpp"
#include "harnacklab/geometry.hpp"
#include "harnacklab/ricci_flow.hpp"

namespace harnacklab {

/// Positive solution of d f/d tau = lap f + c R f on g(T - tau), sampled at
/// uniformly spaced tau records together with the metric dof at each record.
struct LogSolution {
  ManifoldSpec spec;
  double c = 0.0;
  double T = 1.0;
  std::vector<double> taus;        ///< ascending record times
  std::vector<ScalarField> fs;     ///< f at each record, strictly positive
  std::vector<ScalarField> dofs;   ///< metric dof at t = T - tau

  std::size_t records() const { return taus.size(); }

  MetricState state(std::size_t k) const {
    require(k < records(), "LogSolution::state: record index out of range");
    return make_metric_state(spec, T - taus[k], dofs[k]);
  }

  /// u = -log f
  ScalarField u_at(std::size_t k) const {
    require(k < records(), "LogSolution::u_at: record index out of range");
    return -fs[k].log();
  }

  /// v = u - (n/2) log(4 pi tau)
  ScalarField v_at(std::size_t k) const {
    require(k < records(), "LogSolution::v_at: record index out of range");
    const double shift =
        0.5 * spec.n * std::log(4.0 * std::numbers::pi * taus[k]);
    return u_at(k) - shift;
  }
};

/// Forward heat samples d h/d t = lap h on g(t), used for adjoint pairing.
struct HeatSeries {
  std::vector<double> ts;
  std::vector<ScalarField> fields;
};

namespace detail {

inline ScalarField heat_rhs(const ScalarField& f, const MetricState& m,
                            double c) {
  if (c == 0.0) return laplacian(f, m);
  return laplacian(f, m) + c * (m.scalar_curv * f);
}

/// Substep bound: the diffusion part needs the same h^2 bound as the flow;
// the reaction part c R f is limited by accuracy, not stability.  RK4 on
// f' = lambda f has relative error (lambda s)^5 / 120 per step, so the
// inverse-curvature factor is kept small enough that a homogeneous run
// tracks the closed form to ~1e-10 over a unit time span.
inline double heat_stable_dt(const ManifoldSpec& spec, const MetricState& m,
                             double c) {
  const double react =
      0.01 / (1.0 + std::abs(c) * m.scalar_curv.abs().maxCoeff());
  if (spec.homogeneous()) return react;
  const double h = spec.spacing();
  return std::min(kCflFactor * h * h * m.min_conf, react);
}

inline void check_positive(const ScalarField& f, const ManifoldSpec& spec,
                           double tau) {
  if (f.allFinite() && (f > 0.0).all()) return;
  Eigen::Index worst = 0;
  f.minCoeff(&worst);
  const NodeLocation loc = node_location(spec, static_cast<std::size_t>(worst));
  std::string where;
  if (loc.dims == 2)
    where = ", x = " + std::to_string(loc.a) + ", y = " + std::to_string(loc.b);
  else if (loc.dims == 1)
    where = ", theta = " + std::to_string(loc.a);
  throw PositivityError("solution lost positivity at tau = " +
                        std::to_string(tau) + where +
                        ", value = " + std::to_string(f[worst]));
}

}  // namespace detail

/// Integrate the backward equation from f_init at tau0 = traj.tau0 up to
/// tau_end <= T.  Substeps adapt to the stability bound and land exactly on
/// the uniform record times, so reruns reproduce records bit for bit.
inline LogSolution solve_backward(const FlowTrajectory& traj, double c,
                                  const ScalarField& f_init, double tau_end,
                                  int records = 257) {
  const ManifoldSpec& spec = traj.spec;
  require(static_cast<std::size_t>(f_init.size()) == spec.node_count(),
          "solve_backward: initial data size does not match the grid");
  require(tau_end > traj.tau0 && tau_end <= traj.T,
          "solve_backward: need tau0 < tau_end <= T");
  require(records >= 2, "solve_backward: need at least two records");

  LogSolution sol;
  sol.spec = spec;
  sol.c = c;
  sol.T = traj.T;
  sol.taus.reserve(records);
  sol.fs.reserve(records);
  sol.dofs.reserve(records);

  MetricPath path(traj);
  const double span = tau_end - traj.tau0;

  ScalarField f = f_init;
  double tau = traj.tau0;
  auto m0 = path.at(traj.T - tau);
  detail::check_positive(f, spec, tau);
  sol.taus.push_back(tau);
  sol.fs.push_back(f);
  sol.dofs.push_back(m0->dof);

  for (int k = 1; k < records; ++k) {
    const double tau_next = traj.tau0 + span * k / (records - 1);
    while (tau < tau_next) {
      double s = detail::heat_stable_dt(spec, *m0, c);
      const double remaining = tau_next - tau;
      bool landing = false;
      if (s >= remaining) {
        s = remaining;
        landing = true;
      }
      const double tau_mid = tau + 0.5 * s;
      const double tau_up = landing ? tau_next : tau + s;
      const auto m_mid = path.at(traj.T - tau_mid);
      const auto m_up = path.at(traj.T - tau_up);
      const ScalarField k1 = detail::heat_rhs(f, *m0, c);
      const ScalarField k2 = detail::heat_rhs(f + (0.5 * s) * k1, *m_mid, c);
      const ScalarField k3 = detail::heat_rhs(f + (0.5 * s) * k2, *m_mid, c);
      const ScalarField k4 = detail::heat_rhs(f + s * k3, *m_up, c);
      f += (s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      tau = tau_up;
      m0 = m_up;
    }
    detail::check_positive(f, spec, tau);
    sol.taus.push_back(tau);
    sol.fs.push_back(f);
    sol.dofs.push_back(m0->dof);
  }
  return sol;
}

/// Integrate plain forward heat d h/d t = lap h on g(t), recording at the
/// given ascending times (the first entry is the initial time of h_init).
/// Pairing with a c = -1 backward solution is conserved when the record
/// times mirror that solution's records through t = T - tau.
inline HeatSeries solve_forward_heat(const FlowTrajectory& traj,
                                     const ScalarField& h_init,
                                     const std::vector<double>& record_ts) {
  const ManifoldSpec& spec = traj.spec;
  require(static_cast<std::size_t>(h_init.size()) == spec.node_count(),
          "solve_forward_heat: initial data size does not match the grid");
  require(record_ts.size() >= 2, "solve_forward_heat: need at least two records");
  for (std::size_t k = 1; k < record_ts.size(); ++k)
    require(record_ts[k] > record_ts[k - 1],
            "solve_forward_heat: record times must be ascending");

  HeatSeries series;
  series.ts.reserve(record_ts.size());
  series.fields.reserve(record_ts.size());

  MetricPath path(traj);
  ScalarField h = h_init;
  double t = record_ts.front();
  auto m0 = path.at(t);
  series.ts.push_back(t);
  series.fields.push_back(h);

  for (std::size_t k = 1; k < record_ts.size(); ++k) {
    const double t_next = record_ts[k];
    while (t < t_next) {
      double s = detail::heat_stable_dt(spec, *m0, 0.0);
      const double remaining = t_next - t;
      bool landing = false;
      if (s >= remaining) {
        s = remaining;
        landing = true;
      }
      const double t_up = landing ? t_next : t + s;
      const auto m_mid = path.at(t + 0.5 * s);
      const auto m_up = path.at(t_up);
      const ScalarField k1 = detail::heat_rhs(h, *m0, 0.0);
      const ScalarField k2 = detail::heat_rhs(h + (0.5 * s) * k1, *m_mid, 0.0);
      const ScalarField k3 = detail::heat_rhs(h + (0.5 * s) * k2, *m_mid, 0.0);
      const ScalarField k4 = detail::heat_rhs(h + s * k3, *m_up, 0.0);
      h += (s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t = t_up;
      m0 = m_up;
    }
    require(h.allFinite(), "solve_forward_heat: solution diverged");
    series.ts.push_back(t);
    series.fields.push_back(h);
  }
  return series;
}

/// Normalized Gaussian bump around (ca, cb): a smooth stand-in for point
/// data.  The width must resolve on the grid (sigma >= 3 spacings).  On the
/// homogeneous sphere the only mass-one field is the constant one.
inline ScalarField init_near_delta(const MetricState& m, double ca, double cb,
                                   double sigma) {
  const ManifoldSpec& spec = m.spec;
  if (spec.kind == ManifoldKind::RoundSphere)
    return ScalarField::Constant(1, 1.0 / m.volume);

  require(sigma >= 3.0 * spec.spacing(),
          "init_near_delta: sigma must be at least three grid spacings");
  const std::size_t count = spec.node_count();
  ScalarField f(count);
  if (spec.kind == ManifoldKind::ConformalTorus2D) {
    const double L = spec.length;
    const int N = spec.grid;
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < N; ++i) {
        double dx = std::remainder(spec.x_of(i) - ca, L);
        double dy = std::remainder(spec.y_of(j) - cb, L);
        f[static_cast<std::size_t>(j) * N + i] =
            std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const double d = spec.theta_of(static_cast<int>(i)) - ca;
      f[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    }
  }
  const double mass = integrate(f, m);
  require(mass > 0.0, "init_near_delta: degenerate bump");
  return f / mass;
}

}  // namespace harnacklab
