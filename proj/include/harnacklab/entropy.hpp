#pragma once
// Entropy functionals assembled from a stored backward solution: the value
// at each record is integrate(tau^2 H f) with the matching sign-check
// quantity, so monotonicity statements are about exactly the reported
// numbers and not about a separately evolved ODE.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "harnacklab/errors.hpp"
#include "harnacklab/geometry.hpp"
#include "harnacklab/harnack.hpp"
#include "harnacklab/heat_family.hpp"
#include "harnacklab/ricci_flow.hpp"

namespace harnacklab {

enum class EntropyKind { F, W };

inline std::string to_string(EntropyKind kind) {
  return kind == EntropyKind::F ? "F" : "W";
}

struct EntropyValue {
  EntropyKind kind = EntropyKind::F;
  std::vector<double> taus;
  std::vector<double> ts;       ///< t = T - tau, descending
  std::vector<double> values;
  std::vector<double> dvalue_dt;  ///< centered in t; one-sided at the ends
  double min_R_initial = 0.0;     ///< min R of g(0), the hypothesis time
  double min_R_over_run = 0.0;
  bool r_nonnegative = false;     ///< curvature hypothesis, measured not assumed
};

/// Assemble the entropy series from a stored solution.  F pairs with the
/// coupling c = -2 and its sign-check quantity, W with c = -1; a mismatch is
/// a contract violation.  The curvature hypothesis is recorded on the
/// trajectory, never enforced by fiat.
inline EntropyValue eval_entropy(EntropyKind kind, const LogSolution& sol,
                                 const FlowTrajectory& traj) {
  const double expect_c = (kind == EntropyKind::F) ? -2.0 : -1.0;
  require(sol.c == expect_c,
          "eval_entropy: kind " + to_string(kind) + " requires c = " +
              std::to_string(expect_c));
  const HarnackParams p =
      preset(kind == EntropyKind::F ? "THM_1_1" : "THM_1_3");

  EntropyValue e;
  e.kind = kind;
  const std::size_t rec = sol.records();
  require(rec >= 2, "eval_entropy: need at least two records");
  e.taus = sol.taus;
  e.ts.reserve(rec);
  e.values.reserve(rec);
  for (std::size_t k = 0; k < rec; ++k) {
    const MetricState m = sol.state(k);
    const ScalarField H = eval_H(p, sol.u_at(k), sol.taus[k], m);
    const double tau = sol.taus[k];
    e.ts.push_back(sol.T - tau);
    e.values.push_back(tau * tau * integrate(H * sol.fs[k], m));
  }

  e.dvalue_dt.assign(rec, 0.0);
  for (std::size_t k = 0; k < rec; ++k) {
    const std::size_t lo = (k == 0) ? 0 : k - 1;
    const std::size_t hi = (k + 1 == rec) ? k : k + 1;
    e.dvalue_dt[k] = (e.values[hi] - e.values[lo]) / (e.ts[hi] - e.ts[lo]);
  }

  const MetricState m0 =
      make_metric_state(traj.spec, traj.times.front(), traj.dofs.front());
  e.min_R_initial = m0.scalar_curv.minCoeff();
  double min_R = std::numeric_limits<double>::infinity();
  double max_abs_R = 0.0;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const MetricState m =
        make_metric_state(traj.spec, traj.times[k], traj.dofs[k]);
    min_R = std::min(min_R, m.scalar_curv.minCoeff());
    max_abs_R = std::max(max_abs_R, m.scalar_curv.abs().maxCoeff());
  }
  e.min_R_over_run = min_R;
  e.r_nonnegative = min_R >= -1e-10 * (1.0 + max_abs_R);
  return e;
}

struct MonotonicityReport {
  bool pass = false;
  double worst_slope = 0.0;   ///< smallest per-step difference quotient in t
  double worst_t = 0.0;       ///< left endpoint (in t) of the worst step
  std::size_t worst_step = 0; ///< record index of the worst step
  double threshold = 0.0;     ///< allowance applied at the worst step
};

/// Per-step monotonicity in t: every difference quotient must stay above
/// -tol_scale (1 + |value|).  Works on the raw value series so an injected
/// defect is caught at its own step.
inline MonotonicityReport monotonicity_report(const EntropyValue& e,
                                              double tol_scale = 1e-8) {
  require(e.values.size() >= 3, "monotonicity_report: need at least three records");
  MonotonicityReport rep;
  rep.pass = true;
  bool first = true;
  for (std::size_t k = 0; k + 1 < e.values.size(); ++k) {
    const double slope =
        (e.values[k + 1] - e.values[k]) / (e.ts[k + 1] - e.ts[k]);
    const double allow =
        tol_scale * (1.0 + std::max(std::abs(e.values[k]),
                                    std::abs(e.values[k + 1])));
    if (slope < -allow) rep.pass = false;
    if (first || slope < rep.worst_slope) {
      rep.worst_slope = slope;
      rep.worst_t = e.ts[k];
      rep.worst_step = k;
      rep.threshold = allow;
      first = false;
    }
  }
  return rep;
}

}  // namespace harnacklab
