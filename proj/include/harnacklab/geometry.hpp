#pragma once
// Reduced-geometry backends and the discrete differential operators the rest
// of the library is built on.  Three kinds of geometry are supported:
//
//   RoundSphere      homogeneous mode: every field is a single real, the
//                    metric is r(t)^2 times the unit round metric on S^n
//   ConformalTorus2D g = e^{2 phi} (dx^2 + dy^2) on a periodic square
//   RotSymSphere2D   g = e^{2 phi(theta)} g_{S^2}, axisymmetric fields on a
//                    cell-centred polar grid
//
// Discrete structure the solvers rely on (and tests pin down):
//  * laplacian() integrates to exactly zero against the measure (flux form
//    on the polar grid, telescoping periodic stencil on the torus),
//  * the g-trace of the hessian_defect() tensor equals laplacian() to
//    round-off, so completed-square and expanded evolution identities agree
//    at the level of floating point, not just truncation order.

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

#include "harnacklab/errors.hpp"

namespace harnacklab {

/// Values at grid nodes, one per node of the owning ManifoldSpec.
/// RoundSphere fields have a single entry.
using ScalarField = Eigen::ArrayXd;

enum class ManifoldKind { RoundSphere, ConformalTorus2D, RotSymSphere2D };

inline const char* to_string(ManifoldKind k) {
  switch (k) {
    case ManifoldKind::RoundSphere: return "round_sphere";
    case ManifoldKind::ConformalTorus2D: return "torus";
    case ManifoldKind::RotSymSphere2D: return "rotsym_sphere";
  }
  return "?";
}

/// Surface area of the unit n-sphere.
inline double unit_sphere_area(int n) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * (n + 1)) /
         std::tgamma(0.5 * (n + 1));
}

struct ManifoldSpec {
  ManifoldKind kind = ManifoldKind::ConformalTorus2D;
  int n = 2;           ///< dimension (2 for the conformal backends)
  int grid = 64;       ///< nodes per axis; unused by RoundSphere
  double length = 1.0; ///< torus side length
  double r0 = 1.0;     ///< RoundSphere initial radius

  bool homogeneous() const { return kind == ManifoldKind::RoundSphere; }

  std::size_t node_count() const {
    switch (kind) {
      case ManifoldKind::RoundSphere: return 1;
      case ManifoldKind::ConformalTorus2D:
        return static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid);
      case ManifoldKind::RotSymSphere2D: return static_cast<std::size_t>(grid);
    }
    return 0;
  }

  double spacing() const {
    switch (kind) {
      case ManifoldKind::RoundSphere: return 0.0;
      case ManifoldKind::ConformalTorus2D: return length / grid;
      case ManifoldKind::RotSymSphere2D: return std::numbers::pi / grid;
    }
    return 0.0;
  }

  // node coordinates; the polar grid is staggered half a cell off the poles
  double x_of(int i) const { return spacing() * i; }
  double y_of(int j) const { return spacing() * j; }
  double theta_of(int i) const { return spacing() * (i + 0.5); }

  void validate() const {
    switch (kind) {
      case ManifoldKind::RoundSphere:
        require(n >= 2, "RoundSphere requires dimension n >= 2");
        require(r0 > 0.0, "RoundSphere requires r0 > 0");
        break;
      case ManifoldKind::ConformalTorus2D:
        require(n == 2, "ConformalTorus2D is two-dimensional");
        require(grid >= 8, "torus grid must have at least 8 nodes per axis");
        require(length > 0.0, "torus side length must be positive");
        break;
      case ManifoldKind::RotSymSphere2D:
        require(n == 2, "RotSymSphere2D is two-dimensional");
        require(grid >= 8, "polar grid must have at least 8 cells");
        break;
    }
  }
};

/// Where a flat node index sits; dims tells how many coordinates apply.
struct NodeLocation {
  double a = 0.0;  ///< x (torus) or theta (polar grid)
  double b = 0.0;  ///< y (torus)
  int dims = 0;
};

inline NodeLocation node_location(const ManifoldSpec& spec, std::size_t idx) {
  NodeLocation loc;
  switch (spec.kind) {
    case ManifoldKind::RoundSphere:
      loc.dims = 0;
      break;
    case ManifoldKind::ConformalTorus2D: {
      const int i = static_cast<int>(idx % spec.grid);
      const int j = static_cast<int>(idx / spec.grid);
      loc.a = spec.x_of(i);
      loc.b = spec.y_of(j);
      loc.dims = 2;
      break;
    }
    case ManifoldKind::RotSymSphere2D:
      loc.a = spec.theta_of(static_cast<int>(idx));
      loc.dims = 1;
      break;
  }
  return loc;
}

namespace detail {

// ---- periodic torus stencils, row-major indexing idx = j*N + i ----

inline ScalarField torus_lap0(const ScalarField& f, int N, double h) {
  ScalarField out(N * N);
  const double c = 1.0 / (h * h);
  for (int j = 0; j < N; ++j) {
    const int jp = (j + 1 == N) ? 0 : j + 1;
    const int jm = (j == 0) ? N - 1 : j - 1;
    for (int i = 0; i < N; ++i) {
      const int ip = (i + 1 == N) ? 0 : i + 1;
      const int im = (i == 0) ? N - 1 : i - 1;
      out[j * N + i] = c * (f[j * N + ip] + f[j * N + im] + f[jp * N + i] +
                            f[jm * N + i] - 4.0 * f[j * N + i]);
    }
  }
  return out;
}

inline ScalarField torus_dx(const ScalarField& f, int N, double h) {
  ScalarField out(N * N);
  const double c = 1.0 / (2.0 * h);
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < N; ++i) {
      const int ip = (i + 1 == N) ? 0 : i + 1;
      const int im = (i == 0) ? N - 1 : i - 1;
      out[j * N + i] = c * (f[j * N + ip] - f[j * N + im]);
    }
  }
  return out;
}

inline ScalarField torus_dy(const ScalarField& f, int N, double h) {
  ScalarField out(N * N);
  const double c = 1.0 / (2.0 * h);
  for (int j = 0; j < N; ++j) {
    const int jp = (j + 1 == N) ? 0 : j + 1;
    const int jm = (j == 0) ? N - 1 : j - 1;
    for (int i = 0; i < N; ++i)
      out[j * N + i] = c * (f[jp * N + i] - f[jm * N + i]);
  }
  return out;
}

inline ScalarField torus_dxx(const ScalarField& f, int N, double h) {
  ScalarField out(N * N);
  const double c = 1.0 / (h * h);
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < N; ++i) {
      const int ip = (i + 1 == N) ? 0 : i + 1;
      const int im = (i == 0) ? N - 1 : i - 1;
      out[j * N + i] =
          c * (f[j * N + ip] - 2.0 * f[j * N + i] + f[j * N + im]);
    }
  }
  return out;
}

inline ScalarField torus_dyy(const ScalarField& f, int N, double h) {
  ScalarField out(N * N);
  const double c = 1.0 / (h * h);
  for (int j = 0; j < N; ++j) {
    const int jp = (j + 1 == N) ? 0 : j + 1;
    const int jm = (j == 0) ? N - 1 : j - 1;
    for (int i = 0; i < N; ++i)
      out[j * N + i] =
          c * (f[jp * N + i] - 2.0 * f[j * N + i] + f[jm * N + i]);
  }
  return out;
}

inline ScalarField torus_dxy(const ScalarField& f, int N, double h) {
  ScalarField out(N * N);
  const double c = 1.0 / (4.0 * h * h);
  for (int j = 0; j < N; ++j) {
    const int jp = (j + 1 == N) ? 0 : j + 1;
    const int jm = (j == 0) ? N - 1 : j - 1;
    for (int i = 0; i < N; ++i) {
      const int ip = (i + 1 == N) ? 0 : i + 1;
      const int im = (i == 0) ? N - 1 : i - 1;
      out[j * N + i] = c * (f[jp * N + ip] - f[jp * N + im] - f[jm * N + ip] +
                            f[jm * N + im]);
    }
  }
  return out;
}

// ---- axisymmetric S^2 stencils on the staggered polar grid ----

// Flux form of the round-metric Laplacian f'' + cot(theta) f'.  Face fluxes
// carry the sin(theta) weight and vanish identically at both poles, which is
// what regularity of smooth axisymmetric fields demands there and what makes
// the discrete integral of the result exactly zero.
inline ScalarField polar_lap_hat(const ScalarField& f, int N, double h) {
  ScalarField out(N);
  const double c = 1.0 / (h * h);
  for (int i = 0; i < N; ++i) {
    const double sl = (i == 0) ? 0.0 : std::sin(i * h);
    const double sr = (i + 1 == N) ? 0.0 : std::sin((i + 1) * h);
    const double sc = std::sin((i + 0.5) * h);
    const double fl = (i == 0) ? f[0] : f[i - 1];
    const double fr = (i + 1 == N) ? f[N - 1] : f[i + 1];
    out[i] = c * (sr * (fr - f[i]) - sl * (f[i] - fl)) / sc;
  }
  return out;
}

// Centred first derivative with even reflection across the poles.
inline ScalarField polar_dc(const ScalarField& f, int N, double h) {
  ScalarField out(N);
  const double c = 1.0 / (2.0 * h);
  for (int i = 0; i < N; ++i) {
    const double fl = (i == 0) ? f[0] : f[i - 1];
    const double fr = (i + 1 == N) ? f[N - 1] : f[i + 1];
    out[i] = c * (fr - fl);
  }
  return out;
}

}  // namespace detail

/// Metric at a single time slice, with the curvature and quadrature data the
/// solvers and Harnack evaluations consume.  Immutable after construction.
struct MetricState {
  ManifoldSpec spec;
  double t = 0.0;
  ScalarField dof;          ///< phi per node, or {r} for RoundSphere
  ScalarField conf;         ///< e^{2 phi}; RoundSphere stores {r^2}
  ScalarField inv_conf;
  ScalarField scalar_curv;  ///< scalar curvature R per node
  ScalarField weight;       ///< quadrature weight per node, sums to volume
  ScalarField dphi_x, dphi_y;  ///< torus: centred derivatives of phi
  ScalarField dphi_th;         ///< polar grid: centred derivative of phi
  double volume = 0.0;
  double min_conf = 0.0;    ///< min e^{2 phi}; drives the CFL step bound

  double radius() const {
    require(spec.kind == ManifoldKind::RoundSphere, "radius(): not a sphere");
    return dof[0];
  }
};

inline MetricState make_metric_state(const ManifoldSpec& spec, double t,
                                     ScalarField dof) {
  spec.validate();
  require(static_cast<std::size_t>(dof.size()) == spec.node_count(),
          "metric dof size does not match the grid");
  require(dof.allFinite(), "metric dof contains non-finite values");

  MetricState m;
  m.spec = spec;
  m.t = t;
  m.dof = std::move(dof);

  switch (spec.kind) {
    case ManifoldKind::RoundSphere: {
      const double r = m.dof[0];
      require(r > 0.0, "sphere radius must stay positive");
      m.conf = ScalarField::Constant(1, r * r);
      m.inv_conf = ScalarField::Constant(1, 1.0 / (r * r));
      m.scalar_curv =
          ScalarField::Constant(1, spec.n * (spec.n - 1.0) / (r * r));
      m.weight =
          ScalarField::Constant(1, unit_sphere_area(spec.n) * std::pow(r, spec.n));
      break;
    }
    case ManifoldKind::ConformalTorus2D: {
      const int N = spec.grid;
      const double h = spec.spacing();
      m.conf = (2.0 * m.dof).exp();
      m.inv_conf = m.conf.inverse();
      m.scalar_curv = -2.0 * m.inv_conf * detail::torus_lap0(m.dof, N, h);
      m.weight = m.conf * (h * h);
      m.dphi_x = detail::torus_dx(m.dof, N, h);
      m.dphi_y = detail::torus_dy(m.dof, N, h);
      break;
    }
    case ManifoldKind::RotSymSphere2D: {
      const int N = spec.grid;
      const double h = spec.spacing();
      m.conf = (2.0 * m.dof).exp();
      m.inv_conf = m.conf.inverse();
      m.scalar_curv =
          m.inv_conf * (2.0 - 2.0 * detail::polar_lap_hat(m.dof, N, h));
      m.weight = ScalarField(N);
      for (int i = 0; i < N; ++i)
        m.weight[i] =
            m.conf[i] * 2.0 * std::numbers::pi * std::sin(spec.theta_of(i)) * h;
      m.dphi_th = detail::polar_dc(m.dof, N, h);
      break;
    }
  }
  m.volume = m.weight.sum();
  m.min_conf = m.conf.minCoeff();
  return m;
}

namespace detail {
inline void check_shape(const ScalarField& f, const MetricState& m,
                        const char* op) {
  require(static_cast<std::size_t>(f.size()) == m.spec.node_count(),
          std::string(op) + ": field shape does not match the grid");
}
}  // namespace detail

/// Laplace-Beltrami operator of the state's metric.
inline ScalarField laplacian(const ScalarField& f, const MetricState& m) {
  detail::check_shape(f, m, "laplacian");
  switch (m.spec.kind) {
    case ManifoldKind::RoundSphere:
      return ScalarField::Zero(1);
    case ManifoldKind::ConformalTorus2D:
      return m.inv_conf * detail::torus_lap0(f, m.spec.grid, m.spec.spacing());
    case ManifoldKind::RotSymSphere2D:
      return m.inv_conf *
             detail::polar_lap_hat(f, m.spec.grid, m.spec.spacing());
  }
  return {};
}

/// Pointwise metric inner product of gradients, <grad a, grad b>_g.
inline ScalarField grad_inner(const ScalarField& a, const ScalarField& b,
                              const MetricState& m) {
  detail::check_shape(a, m, "grad_inner");
  detail::check_shape(b, m, "grad_inner");
  switch (m.spec.kind) {
    case ManifoldKind::RoundSphere:
      return ScalarField::Zero(1);
    case ManifoldKind::ConformalTorus2D: {
      const int N = m.spec.grid;
      const double h = m.spec.spacing();
      return m.inv_conf * (detail::torus_dx(a, N, h) * detail::torus_dx(b, N, h) +
                           detail::torus_dy(a, N, h) * detail::torus_dy(b, N, h));
    }
    case ManifoldKind::RotSymSphere2D: {
      const int N = m.spec.grid;
      const double h = m.spec.spacing();
      return m.inv_conf * detail::polar_dc(a, N, h) * detail::polar_dc(b, N, h);
    }
  }
  return {};
}

/// Pointwise squared g-norm of  Hess(u) + kappa Ric - (lambda / 2 tau) g.
///
/// All backends here have Ric = (R/n) g, so the defect tensor is the
/// covariant Hessian plus a pointwise multiple of the metric.  The discrete
/// Hessian is assembled so that its g-trace equals laplacian(u) exactly;
/// expanding the square therefore reproduces the expanded evolution identity
/// to round-off.
inline ScalarField hessian_defect(const ScalarField& u, const MetricState& m,
                                  double kappa, double lambda, double tau) {
  detail::check_shape(u, m, "hessian_defect");
  require(tau > 0.0, "hessian_defect: tau must be positive");
  const ScalarField q =
      kappa / m.spec.n * m.scalar_curv - lambda / (2.0 * tau);
  switch (m.spec.kind) {
    case ManifoldKind::RoundSphere:
      // Hess(u) vanishes in homogeneous mode; |q g|^2 = n q^2.
      return static_cast<double>(m.spec.n) * q.square();
    case ManifoldKind::ConformalTorus2D: {
      const int N = m.spec.grid;
      const double h = m.spec.spacing();
      const ScalarField ux = detail::torus_dx(u, N, h);
      const ScalarField uy = detail::torus_dy(u, N, h);
      // Hess(u)_ij = d_i d_j u - Gamma^k_ij d_k u with the conformal
      // Christoffels Gamma^k_ij = d^k_i phi_j + d^k_j phi_i - d_ij phi^k.
      const ScalarField txx =
          detail::torus_dxx(u, N, h) - m.dphi_x * ux + m.dphi_y * uy;
      const ScalarField tyy =
          detail::torus_dyy(u, N, h) - m.dphi_y * uy + m.dphi_x * ux;
      const ScalarField txy =
          detail::torus_dxy(u, N, h) - m.dphi_y * ux - m.dphi_x * uy;
      const ScalarField md = q * m.conf;
      return m.inv_conf.square() *
             ((txx + md).square() + 2.0 * txy.square() + (tyy + md).square());
    }
    case ManifoldKind::RotSymSphere2D: {
      const int N = m.spec.grid;
      const double h = m.spec.spacing();
      const ScalarField du = detail::polar_dc(u, N, h);
      ScalarField ang(N);  // (cot theta + phi') u' = Hess(u)_{psi psi}/sin^2
      for (int i = 0; i < N; ++i) {
        const double th = m.spec.theta_of(i);
        ang[i] = (std::cos(th) / std::sin(th) + m.dphi_th[i]) * du[i];
      }
      // theta-theta component defined through the flux Laplacian so the
      // g-trace of {t_thth, ang} is laplacian(u) exactly.
      const ScalarField tthth = detail::polar_lap_hat(u, N, h) - ang;
      const ScalarField md = q * m.conf;
      return m.inv_conf.square() * ((tthth + md).square() + (ang + md).square());
    }
  }
  return {};
}

/// Integral of f against the state's measure.
inline double integrate(const ScalarField& f, const MetricState& m) {
  detail::check_shape(f, m, "integrate");
  return (f * m.weight).sum();
}

}  // namespace harnacklab
