#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include <harnacklab/harnack.hpp>
#include <harnacklab/heat_family.hpp>
#include <harnacklab/ricci_flow.hpp>

using namespace harnacklab;

namespace {

ScalarField smooth_torus_field(const ManifoldSpec& spec, std::uint64_t seed,
                               double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-scale, scale);
  const int N = spec.grid;
  ScalarField f = ScalarField::Zero(spec.node_count());
  for (int kx = 0; kx <= 2; ++kx)
    for (int ky = 0; ky <= 2; ++ky) {
      const double cs = coef(rng), sn = coef(rng);
      for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) {
          const double ph = 2.0 * std::numbers::pi *
                            (kx * spec.x_of(i) + ky * spec.y_of(j)) /
                            spec.length;
          f[j * N + i] += cs * std::cos(ph) + sn * std::sin(ph);
        }
    }
  return f;
}

ScalarField smooth_polar_field(const ManifoldSpec& spec, std::uint64_t seed,
                               double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-scale, scale);
  ScalarField f = ScalarField::Zero(spec.node_count());
  for (int l = 0; l <= 3; ++l) {
    const double cl = coef(rng);
    for (int i = 0; i < spec.grid; ++i)
      f[i] += cl * std::cos(l * spec.theta_of(i));
  }
  return f;
}

FlowTrajectory normalized_sphere(int n, double T, double tau0) {
  ManifoldSpec spec;
  spec.kind = ManifoldKind::RoundSphere;
  spec.n = n;
  spec.r0 = std::sqrt(2.0 * (n - 1) * T);
  return evolve(spec, ScalarField::Constant(1, spec.r0), T, tau0);
}

}  // namespace

TEST_CASE("preset table pins the coefficient tuples") {
  const HarnackParams p = preset("THM_1_1");
  CHECK(p.alpha == 2.0);
  CHECK(p.beta == 1.0);
  CHECK(p.a == 2.0);
  CHECK(p.b == 0.0);
  CHECK(p.c == -2.0);
  CHECK(p.d == -2.0);
  CHECK(p.variant == HVariant::U);
  CHECK(preset("PERELMAN").variant == HVariant::V);
  CHECK(preset("THMNPH").variant == HVariant::V);
  CHECK(preset("TYPE1_CHE").c == -1.0);
  CHECK_THROWS_AS(preset("THM_9_9"), ConfigError);
  CHECK(preset_names().size() == 7);

  const HarnackParams t1 = with_type1_d(preset("TYPE1_2R"), 3.5);
  CHECK(t1.d == -3.5);
  CHECK_THROWS_AS(with_type1_d(preset("TYPE1_2R"), 0.0), ContractViolation);
}

TEST_CASE("gradient preset evaluates |grad u|^2 - u/tau") {
  ManifoldSpec spec;
  spec.grid = 24;
  const ScalarField phi = smooth_torus_field(spec, 5, 0.1);
  const ScalarField u = smooth_torus_field(spec, 6, 0.4);
  const MetricState m = make_metric_state(spec, 0.0, phi);
  const double tau = 0.37;
  const ScalarField H = eval_H(preset("GRADIENT"), u, tau, m);
  const ScalarField ref = grad_inner(u, u, m) - u / tau;
  // same arithmetic reassociated; round-off scales with u/tau ~ O(1)
  CHECK((H - ref).abs().maxCoeff() < 1e-13);
}

TEST_CASE("completed-square and expanded right-hand sides agree") {
  const double tau = 0.7;
  const std::vector<std::string> names = {"THM_1_1", "THM_1_3", "PERELMAN",
                                          "THMNPH"};
  SECTION("conformal torus") {
    ManifoldSpec spec;
    spec.grid = 32;
    const MetricState m =
        make_metric_state(spec, 0.0, smooth_torus_field(spec, 11, 0.15));
    const ScalarField u = smooth_torus_field(spec, 12, 0.5);
    for (const auto& name : names) {
      const HarnackParams p = preset(name);
      const ScalarField ex = eval_rhs(p, u, tau, m, RhsForm::Expanded);
      const ScalarField cs = eval_rhs(p, u, tau, m, RhsForm::CompletedSquare);
      const double scale = 1.0 + ex.abs().maxCoeff();
      INFO(name);
      CHECK((cs - ex).abs().maxCoeff() < 1e-10 * scale);
    }
  }
  SECTION("rotationally symmetric sphere") {
    ManifoldSpec spec;
    spec.kind = ManifoldKind::RotSymSphere2D;
    spec.grid = 48;
    const MetricState m =
        make_metric_state(spec, 0.0, smooth_polar_field(spec, 13, 0.1));
    const ScalarField u = smooth_polar_field(spec, 14, 0.4);
    for (const auto& name : names) {
      const HarnackParams p = preset(name);
      const ScalarField ex = eval_rhs(p, u, tau, m, RhsForm::Expanded);
      const ScalarField cs = eval_rhs(p, u, tau, m, RhsForm::CompletedSquare);
      const double scale = 1.0 + ex.abs().maxCoeff();
      INFO(name);
      CHECK((cs - ex).abs().maxCoeff() < 1e-10 * scale);
    }
  }
}

TEST_CASE("gradient estimate has its own grouped right-hand side") {
  ManifoldSpec spec;
  spec.grid = 24;
  const MetricState m =
      make_metric_state(spec, 0.0, smooth_torus_field(spec, 21, 0.1));
  const ScalarField u = smooth_torus_field(spec, 22, 0.4);
  const double tau = 0.5;
  const HarnackParams p = preset("GRADIENT");
  const ScalarField grouped = eval_rhs_gradient_form(u, tau, m);
  const ScalarField ex = eval_rhs(p, u, tau, m, RhsForm::Expanded);
  CHECK((grouped - ex).abs().maxCoeff() < 1e-10 * (1.0 + ex.abs().maxCoeff()));
  // the completed square needs alpha != 0 and alpha != beta
  CHECK_THROWS_AS(eval_rhs(p, u, tau, m, RhsForm::CompletedSquare),
                  ContractViolation);
}

TEST_CASE("homogeneous sphere collapses the estimates to -n/tau scalings") {
  const int n = 2;
  const FlowTrajectory traj = normalized_sphere(n, 1.0, 0.01);
  const LogSolution sol2 =
      solve_backward(traj, -2.0, ScalarField::Constant(1, 1.0), 1.0, 101);
  const LogSolution sol1 =
      solve_backward(traj, -1.0, ScalarField::Constant(1, 1.0), 1.0, 101);
  const HarnackParams p11 = preset("THM_1_1");
  const HarnackParams p13 = preset("THM_1_3");
  for (std::size_t k = 0; k < sol2.records(); k += 10) {
    const double tau = sol2.taus[k];
    CHECK(eval_H(p11, sol2, k)[0] == Catch::Approx(-n / tau).epsilon(1e-10));
    CHECK(eval_H(p13, sol1, k)[0] ==
          Catch::Approx(-1.5 * n / tau).epsilon(1e-10));
  }
  CHECK_THROWS_AS(eval_H(p11, sol1, 0), ContractViolation);
}

TEST_CASE("sign check reports pass on the sphere and flags Perelman's case") {
  const FlowTrajectory traj = normalized_sphere(2, 1.0, 0.01);
  const LogSolution sol2 =
      solve_backward(traj, -2.0, ScalarField::Constant(1, 1.0), 1.0, 101);
  const LogSolution sol1 =
      solve_backward(traj, -1.0, ScalarField::Constant(1, 1.0), 1.0, 101);

  const NonpositivityReport r11 =
      check_nonpositivity(preset("THM_1_1"), sol2, traj);
  CHECK(r11.status == "pass");
  CHECK(r11.gate_pass);
  CHECK(r11.worst_value < 0.0);
  CHECK(r11.taus.size() == sol2.records());

  const NonpositivityReport rp =
      check_nonpositivity(preset("PERELMAN"), sol1, traj);
  CHECK(rp.status == "informational");
  CHECK(rp.gate_pass);

  // curvature-sign hypothesis for the c = -1 estimate is recorded, not forced
  const NonpositivityReport r13 =
      check_nonpositivity(preset("THM_1_3"), sol1, traj);
  CHECK(r13.status == "pass");
  bool found = false;
  for (const auto& h : r13.hypotheses)
    if (h.name.find("curvature nonnegative") != std::string::npos) {
      found = true;
      CHECK(h.satisfied);
    }
  CHECK(found);
}

TEST_CASE("sign check reports hypotheses-unmet on a sign-changing curvature") {
  ManifoldSpec spec;
  spec.grid = 16;
  const ScalarField phi = smooth_torus_field(spec, 31, 0.08);
  const FlowTrajectory traj = evolve(spec, phi, 0.2, 0.02);
  ScalarField f0 = ScalarField::Constant(spec.node_count(), 1.0);
  const LogSolution sol = solve_backward(traj, -1.0, f0, 0.2, 17);
  const NonpositivityReport r =
      check_nonpositivity(preset("THM_1_3"), sol, traj);
  CHECK(r.status == "hypotheses-unmet");
  CHECK(r.gate_pass);
}

TEST_CASE("constant-curvature replacement is grid-chosen and admissible") {
  const FlowTrajectory traj = normalized_sphere(2, 1.0, 0.01);
  const LogSolution sol =
      solve_backward(traj, -2.0, ScalarField::Constant(1, 1.0), 1.0, 101);
  HarnackParams p = preset("TYPE1_2R");
  const double d0 = choose_type1_d(p, sol);
  CHECK(d0 == 2.0);  // first admissible grid point for the sphere run
  p = with_type1_d(p, d0);
  const NonpositivityReport r = check_nonpositivity(p, sol, traj);
  CHECK(r.status == "pass");
}

TEST_CASE("no admissible constant raises its own error type") {
  // a record with a violently curved log-density at large tau0 pushes the
  // required constant past the top of the search grid
  ManifoldSpec spec;
  spec.grid = 16;
  LogSolution sol;
  sol.spec = spec;
  sol.c = -2.0;
  sol.T = 12.0;
  sol.taus = {10.0, 11.0};
  ScalarField u(spec.node_count());
  const double k = 2.0 * std::numbers::pi;
  for (int j = 0; j < spec.grid; ++j)
    for (int i = 0; i < spec.grid; ++i)
      u[j * spec.grid + i] = 5.0 * std::sin(k * spec.x_of(i));
  sol.fs = {(-u).exp(), (-u).exp()};
  sol.dofs = {ScalarField::Zero(spec.node_count()),
              ScalarField::Zero(spec.node_count())};
  CHECK_THROWS_AS(choose_type1_d(preset("TYPE1_2R"), sol),
                  NoAdmissibleConstant);
}

TEST_CASE("initial-sign hypothesis gates the constant-curvature presets") {
  const FlowTrajectory traj = normalized_sphere(2, 1.0, 0.01);
  const LogSolution sol =
      solve_backward(traj, -1.0, ScalarField::Constant(1, 1.0), 1.0, 101);
  // a tiny constant leaves H(tau0) positive, so the premise fails
  const HarnackParams p = with_type1_d(preset("TYPE1_CHE"), 1e-3);
  const NonpositivityReport r = check_nonpositivity(p, sol, traj);
  CHECK(r.status == "hypotheses-unmet");
}
