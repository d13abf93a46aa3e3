#pragma once
// Forward integration of the metric flow and dense-in-time access to it.
//
// The trajectory persists a bounded number of snapshot states; the heat
// solvers need the metric far more densely than that, so MetricPath
// re-integrates the flow inside one stored interval at a time (always
// forward in t, the well-posed direction) and exposes cubic Hermite dense
// output.  Because the re-integration applies the identical stepping rule
// from the identical stored state, it reproduces the original step sequence
// bit for bit.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <vector>

#include "harnacklab/errors.hpp"
#include "harnacklab/geometry.hpp"

namespace harnacklab {

namespace detail {

// Explicit RK4 on the diffusion operators stays stable (and each Euler
// stage positivity-preserving) comfortably below dt = h^2 min(e^{2 phi})/4.
inline constexpr double kCflFactor = 0.2;

inline ScalarField flow_rhs(const ManifoldSpec& spec, const ScalarField& phi) {
  const int N = spec.grid;
  const double h = spec.spacing();
  switch (spec.kind) {
    case ManifoldKind::ConformalTorus2D:
      // d phi/dt = -R/2 = e^{-2 phi} lap0 phi
      return (-2.0 * phi).exp() * torus_lap0(phi, N, h);
    case ManifoldKind::RotSymSphere2D:
      // d phi/dt = -R/2 = e^{-2 phi} (lap_hat phi - 1)
      return (-2.0 * phi).exp() * (polar_lap_hat(phi, N, h) - 1.0);
    case ManifoldKind::RoundSphere:
      break;  // closed form, never stepped numerically
  }
  require(false, "flow_rhs: unsupported backend");
  return {};
}

inline double flow_cfl_dt(const ManifoldSpec& spec, const ScalarField& phi) {
  const double h = spec.spacing();
  return kCflFactor * h * h * std::exp(2.0 * phi.minCoeff());
}

}  // namespace detail

/// Nominal step size policy for the flow integration.  fixed_dt == 0 means
/// adaptive: every step takes the current stability bound.
struct SteppingRule {
  double fixed_dt = 0.0;
};

/// Stored metric flow over t in [0, T - tau0].  The window next to the
/// final time T is excised so backward solves start from regular data.
struct FlowTrajectory {
  ManifoldSpec spec;
  double T = 1.0;
  double tau0 = 0.01;
  SteppingRule rule;
  std::vector<double> times;        ///< ascending snapshot times
  std::vector<ScalarField> dofs;    ///< one dof vector per snapshot

  double span() const { return T - tau0; }
};

namespace detail {

// Advance phi from t_begin to t_end under the rule, calling
// visit(t, phi, dphi_dt) at every substep boundary including t_begin (but
// not t_end, whose slope the caller rarely needs).  Throws CflError if a
// fixed step violates the stability bound or the step count explodes.
template <class Visitor>
inline void advance_flow(const ManifoldSpec& spec, const SteppingRule& rule,
                         ScalarField& phi, double t_begin, double t_end,
                         Visitor&& visit) {
  double t = t_begin;
  long guard = 0;
  while (t < t_end) {
    const double stable = flow_cfl_dt(spec, phi);
    double dt;
    if (rule.fixed_dt > 0.0) {
      if (rule.fixed_dt > stable)
        throw CflError("flow step size " + std::to_string(rule.fixed_dt) +
                       " exceeds the stability bound " +
                       std::to_string(stable) + " at t = " + std::to_string(t));
      dt = rule.fixed_dt;
    } else {
      dt = stable;
    }
    const double remaining = t_end - t;
    bool landing = false;
    if (dt >= remaining) {
      dt = remaining;
      landing = true;
    }
    const ScalarField k1 = flow_rhs(spec, phi);
    visit(t, phi, k1);
    const ScalarField k2 = flow_rhs(spec, phi + (0.5 * dt) * k1);
    const ScalarField k3 = flow_rhs(spec, phi + (0.5 * dt) * k2);
    const ScalarField k4 = flow_rhs(spec, phi + dt * k3);
    phi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = landing ? t_end : t + dt;
    if (++guard > 100'000'000L)
      throw CflError("flow step count exploded; stability bound collapsed");
  }
}

}  // namespace detail

/// Integrate the flow from dof0 over [0, T - tau0].  steps == 0 selects
/// adaptive stepping at the stability bound; otherwise span/steps is used as
/// the nominal step (clipped at snapshot boundaries) and validated against
/// the bound every step.  At most max_records snapshots are stored; the
/// dense path between them is recoverable bit-exactly through MetricPath.
inline FlowTrajectory evolve(const ManifoldSpec& spec, const ScalarField& dof0,
                             double T, double tau0, long steps = 0,
                             int max_records = 801) {
  spec.validate();
  require(T > 0.0, "evolve: T must be positive");
  require(tau0 > 0.0 && tau0 < T, "evolve: need 0 < tau0 < T");
  require(static_cast<std::size_t>(dof0.size()) == spec.node_count(),
          "evolve: initial dof size does not match the grid");
  require(steps == 0 || steps >= 16, "evolve: steps must be 0 (adaptive) or >= 16");
  require(max_records >= 2, "evolve: need at least two snapshots");

  FlowTrajectory traj;
  traj.spec = spec;
  traj.T = T;
  traj.tau0 = tau0;
  const double span = T - tau0;

  if (spec.kind == ManifoldKind::RoundSphere) {
    const double r0 = dof0[0];
    require(r0 > 0.0, "evolve: sphere radius must be positive");
    const double final_r_sq = r0 * r0 - 2.0 * (spec.n - 1) * span;
    if (final_r_sq <= 0.0)
      throw BlowUpRangeError(
          "sphere shrinks to zero inside [0, T - tau0]; need r0^2 > 2(n-1)(T-tau0)");
    const int records = max_records;
    traj.times.reserve(records);
    traj.dofs.reserve(records);
    for (int j = 0; j < records; ++j) {
      const double t = span * j / (records - 1);
      traj.times.push_back(t);
      traj.dofs.push_back(ScalarField::Constant(
          1, std::sqrt(r0 * r0 - 2.0 * (spec.n - 1) * t)));
    }
    return traj;
  }

  traj.rule.fixed_dt = (steps == 0) ? 0.0 : span / steps;
  const long records =
      (steps == 0) ? max_records : std::min<long>(max_records, steps + 1);

  ScalarField phi = dof0;
  traj.times.push_back(0.0);
  traj.dofs.push_back(phi);
  for (long j = 1; j < records; ++j) {
    const double t_next = span * j / (records - 1);
    detail::advance_flow(spec, traj.rule, phi, traj.times.back(), t_next,
                         [](double, const ScalarField&, const ScalarField&) {});
    require(phi.allFinite(), "evolve: flow diverged (non-finite dof)");
    traj.times.push_back(t_next);
    traj.dofs.push_back(phi);
  }
  return traj;
}

/// Metric state at any t in [0, T - tau0]: RoundSphere evaluates the closed
/// form (the squared radius is linear in t, so this is also what linear
/// interpolation of r^2 between snapshots gives); the conformal backends
/// interpolate the stored dof linearly and rebuild curvature from it.
inline MetricState state_at(const FlowTrajectory& traj, double t) {
  const double slack = 1e-12 * (1.0 + traj.T);
  require(t >= -slack && t <= traj.span() + slack,
          "state_at: t outside the stored trajectory");
  t = std::clamp(t, 0.0, traj.span());

  if (traj.spec.kind == ManifoldKind::RoundSphere) {
    const double r0 = traj.dofs.front()[0];
    const double r_sq = r0 * r0 - 2.0 * (traj.spec.n - 1) * t;
    return make_metric_state(traj.spec, t, ScalarField::Constant(1, std::sqrt(r_sq)));
  }

  const auto& ts = traj.times;
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const std::size_t k =
      (it == ts.begin()) ? 0
                         : std::min<std::size_t>(ts.size() - 2, it - ts.begin() - 1);
  const double ta = ts[k], tb = ts[k + 1];
  if (t <= ta) return make_metric_state(traj.spec, ta, traj.dofs[k]);
  if (t >= tb) return make_metric_state(traj.spec, tb, traj.dofs[k + 1]);
  const double s = (t - ta) / (tb - ta);
  return make_metric_state(traj.spec, t,
                           (1.0 - s) * traj.dofs[k] + s * traj.dofs[k + 1]);
}

/// Curvature-decay certificate: d0 = max over snapshots of |Rm| (T - t).
/// On surfaces |Rm| is |R| times a fixed normalization constant; the same
/// convention is applied to the homogeneous sphere and recorded in reports.
struct TypeIBound {
  double d0 = 0.0;
  double rm_normalization = std::numbers::sqrt2 / 2.0;
  double worst_t = 0.0;
  bool achieved = false;
};

inline TypeIBound type_one_bound(const FlowTrajectory& traj) {
  TypeIBound b;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const MetricState m =
        make_metric_state(traj.spec, traj.times[k], traj.dofs[k]);
    const double rm = b.rm_normalization * m.scalar_curv.abs().maxCoeff();
    const double val = rm * (traj.T - traj.times[k]);
    if (!b.achieved || val > b.d0) {
      b.d0 = val;
      b.worst_t = traj.times[k];
    }
    b.achieved = true;
  }
  require(b.achieved, "type_one_bound: empty trajectory");
  return b;
}

/// Dense-in-time access to the flow between snapshots.  States returned are
/// shared and immutable; the most recent one is cached so a repeated query
/// at the same t is free.
class MetricPath {
 public:
  explicit MetricPath(const FlowTrajectory& traj) : traj_(&traj) {
    require(traj.times.size() >= 2 || traj.spec.homogeneous(),
            "MetricPath: trajectory has no stored interval");
  }

  std::shared_ptr<const MetricState> at(double t) {
    if (cached_ && t == cached_t_) return cached_;
    auto st = std::make_shared<MetricState>(eval(t));
    cached_ = st;
    cached_t_ = t;
    return st;
  }

 private:
  MetricState eval(double t) {
    const FlowTrajectory& traj = *traj_;
    if (traj.spec.kind == ManifoldKind::RoundSphere) return state_at(traj, t);

    const double slack = 1e-12 * (1.0 + traj.T);
    require(t >= -slack && t <= traj.span() + slack,
            "MetricPath: t outside the trajectory");
    t = std::clamp(t, 0.0, traj.span());

    const auto& ts = traj.times;
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    const std::size_t k =
        (it == ts.begin()) ? 0
                           : std::min<std::size_t>(ts.size() - 2, it - ts.begin() - 1);
    refine(k);

    // locate the mini segment [node_ts_[j], node_ts_[j+1]] containing t
    const auto jt = std::upper_bound(node_ts_.begin(), node_ts_.end(), t);
    const std::size_t j =
        (jt == node_ts_.begin())
            ? 0
            : std::min<std::size_t>(node_ts_.size() - 2, jt - node_ts_.begin() - 1);
    const double ta = node_ts_[j], tb = node_ts_[j + 1];
    if (t <= ta)
      return make_metric_state(traj.spec, ta, node_phi_[j]);
    if (t >= tb)
      return make_metric_state(traj.spec, tb, node_phi_[j + 1]);
    const double dt = tb - ta;
    const double s = (t - ta) / dt;
    const double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    const double h10 = s * (1.0 - s) * (1.0 - s);
    const double h01 = s * s * (3.0 - 2.0 * s);
    const double h11 = s * s * (s - 1.0);
    ScalarField phi = h00 * node_phi_[j] + (h10 * dt) * node_dot_[j] +
                      h01 * node_phi_[j + 1] + (h11 * dt) * node_dot_[j + 1];
    return make_metric_state(traj.spec, t, std::move(phi));
  }

  void refine(std::size_t k) {
    if (have_interval_ && k == interval_) return;
    const FlowTrajectory& traj = *traj_;
    node_ts_.clear();
    node_phi_.clear();
    node_dot_.clear();

    ScalarField phi = traj.dofs[k];
    const ScalarField dot0 = detail::flow_rhs(traj.spec, phi);
    const bool constant_interval =
        dot0.abs().maxCoeff() == 0.0 &&
        (traj.dofs[k + 1] - phi).abs().maxCoeff() == 0.0;
    if (constant_interval) {
      node_ts_ = {traj.times[k], traj.times[k + 1]};
      node_phi_ = {phi, phi};
      node_dot_ = {ScalarField::Zero(phi.size()), ScalarField::Zero(phi.size())};
    } else {
      detail::advance_flow(traj.spec, traj.rule, phi, traj.times[k],
                           traj.times[k + 1],
                           [&](double t, const ScalarField& ph, const ScalarField& k1) {
                             node_ts_.push_back(t);
                             node_phi_.push_back(ph);
                             node_dot_.push_back(k1);
                           });
      node_ts_.push_back(traj.times[k + 1]);
      node_phi_.push_back(phi);
      node_dot_.push_back(detail::flow_rhs(traj.spec, phi));
    }
    have_interval_ = true;
    interval_ = k;
  }

  const FlowTrajectory* traj_;
  bool have_interval_ = false;
  std::size_t interval_ = 0;
  std::vector<double> node_ts_;
  std::vector<ScalarField> node_phi_;
  std::vector<ScalarField> node_dot_;
  std::shared_ptr<const MetricState> cached_;
  double cached_t_ = 0.0;
};

}  // namespace harnacklab
