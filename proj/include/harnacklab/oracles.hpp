#pragma once
// Closed-form references the numerical solvers are tested against.  Nothing
// in here touches the grid machinery: the sphere oracle is pure ODE algebra,
// the flat kernel is an image sum, and the sharp-gradient baseline check
// builds its own one-dimensional periodic grid.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "harnacklab/errors.hpp"
#include "harnacklab/geometry.hpp"

namespace harnacklab {

/// Shrinking round sphere under the curvature flow: r(t)^2 = r0^2 - 2(n-1) t.
/// Also carries the homogeneous solution of  df/dtau = c R f  in closed form.
struct SphereOracle {
  int n = 2;
  double r0 = 1.0;
  double T = 1.0;

  double r_sq(double t) const { return r0 * r0 - 2.0 * (n - 1) * t; }

  double r(double t) const {
    const double s = r_sq(t);
    require(s > 0.0, "sphere oracle evaluated past the blow-up time");
    return std::sqrt(s);
  }

  double R_of_t(double t) const { return n * (n - 1.0) / r_sq(t); }
  double R_of_tau(double tau) const { return R_of_t(T - tau); }

  double volume(double t) const {
    return unit_sphere_area(n) * std::pow(r(t), n);
  }

  /// Homogeneous solution of df/dtau = c R f with f(tau0) = f0.  Writing
  /// r^2(T - tau) = rT^2 + 2(n-1) tau, the integral of R is a logarithm:
  ///   f(tau) = f0 * ((rT^2 + 2(n-1) tau) / (rT^2 + 2(n-1) tau0))^{c n / 2}.
  double f_homogeneous(double tau, double c, double f0, double tau0) const {
    const double rT_sq = r0 * r0 - 2.0 * (n - 1) * T;
    const double num = rT_sq + 2.0 * (n - 1) * tau;
    const double den = rT_sq + 2.0 * (n - 1) * tau0;
    require(num > 0.0 && den > 0.0,
            "sphere oracle: tau range crosses the blow-up time");
    return f0 * std::pow(num / den, 0.5 * c * n);
  }
};

inline SphereOracle sphere_closed_forms(int n, double r0, double T) {
  require(n >= 2, "sphere oracle requires n >= 2");
  require(r0 > 0.0 && T > 0.0, "sphere oracle requires r0 > 0 and T > 0");
  return SphereOracle{n, r0, T};
}

/// Static flat periodic domain for the kernel oracle; dim 1 is a circle,
/// dim 2 a square torus, both with the given period per axis.
struct FlatSpec {
  int dim = 1;
  double length = 2.0 * std::numbers::pi;
};

namespace detail {

// One-dimensional wrapped Gaussian; the image sum is truncated once a term
// falls below 1e-14 of the running total on both tails.
inline double wrapped_gaussian(double z, double t, double L) {
  const double norm = 1.0 / std::sqrt(4.0 * std::numbers::pi * t);
  double sum = 0.0;
  for (int side = 0; side < 2; ++side) {
    const double dir = (side == 0) ? 1.0 : -1.0;
    for (int m = (side == 0) ? 0 : 1; m < 100000; ++m) {
      const double d = z + dir * m * L;
      const double term = std::exp(-d * d / (4.0 * t));
      sum += term;
      if (term < 1e-14 * sum && m * L > std::abs(z) + 6.0 * std::sqrt(t))
        break;
    }
  }
  return norm * sum;
}

}  // namespace detail

/// Heat kernel on the static flat spec, evaluated at time t for the source
/// at y.  x and y have spec.dim coordinates.
inline double flat_heat_kernel(const FlatSpec& spec, double t, const double* x,
                               const double* y) {
  require(spec.dim == 1 || spec.dim == 2, "flat kernel: dim must be 1 or 2");
  require(spec.length > 0.0, "flat kernel: period must be positive");
  require(t > 0.0, "flat kernel: t must be positive");
  double k = 1.0;
  for (int d = 0; d < spec.dim; ++d)
    k *= detail::wrapped_gaussian(x[d] - y[d], t, spec.length);
  return k;
}

struct LiYauReport {
  double min_q = 0.0;   ///< min over grid and sampled times of lap(ln f) + n/(2t)
  double worst_t = 0.0;
  double worst_x = 0.0;
  double tolerance = 1e-6;
  bool pass = false;
};

/// Sharp-gradient baseline for the static kernel: checks that the discrete
/// lap(ln f) + n/(2t) stays above -tolerance over the whole grid and time
/// range.  Only the circle (dim 1, n = 1) is needed; the product structure
/// would reduce a torus check to two circle checks anyway.
inline LiYauReport li_yau_check(const FlatSpec& spec, double source,
                                double t_lo, double t_hi, int grid,
                                int samples, double tolerance = 1e-6) {
  require(spec.dim == 1, "li_yau_check runs on the circle spec");
  require(t_lo > 0.0 && t_hi > t_lo, "li_yau_check: bad time range");
  require(grid >= 16 && samples >= 2, "li_yau_check: grid/samples too small");

  const double L = spec.length;
  const double h = L / grid;
  LiYauReport rep;
  rep.tolerance = tolerance;
  rep.min_q = std::numeric_limits<double>::infinity();

  std::vector<double> lnf(grid);
  for (int s = 0; s < samples; ++s) {
    const double t = t_lo + (t_hi - t_lo) * s / (samples - 1);
    for (int i = 0; i < grid; ++i) {
      const double x = i * h;
      lnf[i] = std::log(flat_heat_kernel(spec, t, &x, &source));
    }
    for (int i = 0; i < grid; ++i) {
      const int ip = (i + 1 == grid) ? 0 : i + 1;
      const int im = (i == 0) ? grid - 1 : i - 1;
      const double lap = (lnf[ip] - 2.0 * lnf[i] + lnf[im]) / (h * h);
      const double q = lap + 0.5 / t;
      if (q < rep.min_q) {
        rep.min_q = q;
        rep.worst_t = t;
        rep.worst_x = i * h;
      }
    }
  }
  rep.pass = rep.min_q >= -tolerance;
  return rep;
}

}  // namespace harnacklab
