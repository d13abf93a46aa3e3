// Round sphere collapsing at its blow-up rate: with r0^2 = 2(n-1)T the
// scalar curvature equals n/(2 tau), and the two homogeneous Harnack
// quantities reduce to -n/tau and -3n/(2 tau).  Prints the computed
// values next to those closed forms across a decade of tau.

#include <cstdio>

#include <harnacklab/harnacklab.hpp>

int main() {
  using namespace harnacklab;

  const int n = 3;
  const double T = 1.0;
  ManifoldSpec spec;
  spec.kind = ManifoldKind::RoundSphere;
  spec.n = n;
  spec.r0 = std::sqrt(2.0 * (n - 1) * T);

  const double tau0 = 0.01;
  const FlowTrajectory traj =
      evolve(spec, ScalarField::Constant(1, spec.r0), T, tau0);
  const LogSolution sol =
      solve_backward(traj, -2.0, ScalarField::Constant(1, 1.0), T);

  const HarnackParams p11 = preset("THM_1_1");
  const HarnackParams p13 = preset("THM_1_3");
  const LogSolution sol13 =
      solve_backward(traj, -1.0, ScalarField::Constant(1, 1.0), T);

  std::printf("%10s %12s %14s %14s %14s %14s\n", "tau", "r", "H(-2)", "-n/tau",
              "H(-1)", "-3n/(2tau)");
  for (std::size_t k = 0; k < sol.records(); k += 32) {
    const double tau = sol.taus[k];
    const MetricState m = sol.state(k);
    const double h11 = eval_H(p11, sol, k)[0];
    const double h13 = eval_H(p13, sol13, k)[0];
    std::printf("%10.4f %12.6f %14.6f %14.6f %14.6f %14.6f\n", tau, m.radius(),
                h11, -n / tau, h13, -1.5 * n / tau);
  }
  return 0;
}
