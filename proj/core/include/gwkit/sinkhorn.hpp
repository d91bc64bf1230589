#pragma once

#include <vector>

#include "gwkit/types.hpp"

namespace gwkit {

/// K[i][j] = exp(-cost[i][j] / epsilon). Entries underflow to 0 for
/// cost/epsilon beyond ~745; use the log-domain solver in that regime.
Matrix gibbsKernel(const Matrix& cost, double epsilon);

/// The default regularization 0.01 x mean(cost), or 1 when the mean is 0.
double defaultEpsilon(const Matrix& cost);

/// True when exp(-C/eps) is at risk of underflow: eps < 0.05 * max(cost).
bool needsLogDomain(const Matrix& cost, double epsilon);

struct SinkhornResult {
  Coupling coupling;
  /// Dual potentials f = eps log a, g = eps log b, so that
  /// plan = exp((f_i + g_j - C_ij) / eps).
  Vector f;
  Vector g;
  double epsilon = 0.0;
  int iterations = 0;
  /// L1 violation of the row marginal after the last column update. Columns
  /// are exact after that update, so this is the full marginal error.
  double marginalError = 0.0;
  bool converged = false;
  bool logDomain = false;
  /// marginalError after every iteration.
  std::vector<double> errorTrace;
};

/// Entropic OT by Sinkhorn scaling a <- mu / (K b), b <- nu / (K^T a).
/// Returns the last iterate with converged = false if maxSinkhornIters is
/// reached first. The log-domain path is taken when cfg.logDomain is set or
/// cfg.autoLogDomain applies; otherwise a zero scaling denominator raises
/// KernelUnderflowError.
SinkhornResult sinkhornSolve(const Matrix& cost, const DiscreteDistribution& mu,
                             const DiscreteDistribution& nu, const SolverConfig& cfg);

/// Same, starting from the column potential g0 (e.g. from a previous solve on
/// a nearby cost) instead of g = 0. The fixed point is unchanged.
SinkhornResult sinkhornSolveFrom(const Matrix& cost, const DiscreteDistribution& mu,
                                 const DiscreteDistribution& nu, const SolverConfig& cfg,
                                 const Vector& g0);

/// Projects a nonnegative plan onto the couplings of (mu, nu): rows and then
/// columns are scaled down to their targets and the remaining deficit is
/// filled with a rank-one correction. The L1 change is at most twice the
/// plan's marginal violation.
Matrix roundToMarginals(const Matrix& plan, const DiscreteDistribution& mu,
                        const DiscreteDistribution& nu);

/// <cost, plan>.
double linearTransportCost(const Matrix& cost, const Matrix& plan);

}  // namespace gwkit
