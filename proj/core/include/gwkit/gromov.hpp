#pragma once

#include <vector>

#include "gwkit/sinkhorn.hpp"
#include "gwkit/types.hpp"

namespace gwkit {

struct GWResult {
  Coupling coupling;
  /// sum_{ijkl} (cx_ik - cy_jl)^2 pi_ij pi_kl at the returned coupling.
  double transportCost = 0.0;
  /// transportCost + 2 eps sum pi (log pi - 1). The outer fixed point is a
  /// stationary point of this functional, and it decreases monotonically
  /// along the iteration.
  double entropicObjective = 0.0;
  double epsilon = 0.0;
  int outerIterations = 0;
  /// The outer change ||pi_{t+1} - pi_t||_1 fell below cfg.marginalTol.
  bool converged = false;
  /// Marginal error of the last Sinkhorn projection. When that projection
  /// hit its iteration limit the plan was rounded onto the marginals, so the
  /// returned coupling is feasible either way.
  double projectionError = 0.0;
  bool projectionConverged = true;
  /// transportCost after every outer iteration of the selected start.
  std::vector<double> objectiveTrace;
  /// entropicObjective after every outer iteration.
  std::vector<double> entropicTrace;
  /// 0 for the product start, 1 + i * m + j for the anchor (i, j).
  int start = 0;
};

/// L[i][j] = sum_{k,l} (cx[i][k] - cy[j][l])^2 plan[k][l], computed as
/// (cx∘cx) p 1^T + 1 q^T (cy∘cy)^T - 2 cx plan cy^T with p, q the plan's
/// row and column sums. O(n^2 m + n m^2).
Matrix gwLinearizedCost(const Matrix& cx, const Matrix& cy, const Matrix& plan);
Matrix gwLinearizedCost(const IntraCostMatrix& cx, const IntraCostMatrix& cy,
                        const Coupling& pi);

/// sum_{ijkl} (cx_ik - cy_jl)^2 plan_ij plan_kl.
double gwObjective(const Matrix& cx, const Matrix& cy, const Matrix& plan);

/// Unweighted mean of the four-index cost (cx_ik - cy_jl)^2.
double gwMeanCost(const Matrix& cx, const Matrix& cy);

/// Partial derivatives of gwObjective with respect to each entry cy[j][l],
/// holding the plan fixed (entries treated as independent).
Matrix gwCostGradient(const Matrix& cx, const Matrix& cy, const Matrix& plan);

/// Entropic GW by linearize-and-project: pi <- Sinkhorn(L(pi), eps). Starts
/// from the product coupling and, when n*m <= cfg.maxAnchorStarts, from every
/// anchor pair. All starts are screened with a loose budget; the three best
/// are then run to cfg's tolerances and the lowest transport cost is kept
/// (objectiveTrace/entropicTrace cover that final run). Unset epsilon
/// defaults to 0.01 x gwMeanCost.
GWResult gwSolve(const FeatureBatch& x, const FeatureBatch& y,
                 const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                 const SolverConfig& cfg);
GWResult gwSolve(const IntraCostMatrix& cx, const IntraCostMatrix& cy,
                 const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                 const SolverConfig& cfg);
/// Same on raw cost matrices (no symmetry requirement).
GWResult gwSolveCosts(const Matrix& cx, const Matrix& cy, const DiscreteDistribution& mu,
                      const DiscreteDistribution& nu, const SolverConfig& cfg);

/// One outer loop from a given coupling; no multi-start. Requires
/// cfg.epsilon to be set.
GWResult gwDescend(const Matrix& cx, const Matrix& cy, const Coupling& start,
                   const SolverConfig& cfg);

/// Grid search of the unregularized objective over uniform-marginal
/// couplings for n = m <= 3: one free parameter at n = 2, four at n = 3.
/// The coarse grid at `gridStep` always contains the permutation couplings;
/// the best coarse points are then refined by successively finer local grids.
GWResult gwBruteForce(const IntraCostMatrix& cx, const IntraCostMatrix& cy,
                      double gridStep);

}  // namespace gwkit
