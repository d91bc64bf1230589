#include "gwkit/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "gwkit/error.hpp"

namespace gwkit {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void checkCost(const Matrix& cost) {
  if (cost.size() == 0) throw InputError("cost matrix is empty");
  if (!cost.allFinite()) throw InputError("cost matrix contains non-finite entries");
}

void checkProblem(const Matrix& cost, const DiscreteDistribution& mu,
                  const DiscreteDistribution& nu) {
  checkCost(cost);
  if (cost.rows() != mu.size() || cost.cols() != nu.size()) {
    throw InputError("cost is " + std::to_string(cost.rows()) + "x" +
                     std::to_string(cost.cols()) + " but marginals have sizes " +
                     std::to_string(mu.size()) + " and " + std::to_string(nu.size()));
  }
}

double resolveEpsilon(const Matrix& cost, const SolverConfig& cfg) {
  cfg.validate();
  return cfg.epsilon ? *cfg.epsilon : defaultEpsilon(cost);
}

Vector logWeights(const DiscreteDistribution& d) {
  Vector out(d.size());
  for (Index i = 0; i < d.size(); ++i) out[i] = d[i] > 0.0 ? std::log(d[i]) : kNegInf;
  return out;
}

// log sum_j exp(v_j), with -inf entries contributing zero.
template <typename Expr>
double logSumExp(const Expr& v) {
  double hi = kNegInf;
  for (Index j = 0; j < v.size(); ++j) hi = std::max(hi, static_cast<double>(v[j]));
  if (hi == kNegInf) return kNegInf;
  double s = 0.0;
  for (Index j = 0; j < v.size(); ++j) s += std::exp(v[j] - hi);
  return hi + std::log(s);
}

// Stabilized scaling: the plan is diag(a) Kt diag(b) with
// Kt = exp(S + u 1^T + 1 v^T), S = -C/eps. Scalings are absorbed into the
// log potentials u, v once they drift far from 1, and an exact log-sum-exp
// iteration replaces a scaling step whose denominator underflowed. Each
// ordinary iteration therefore costs two matrix-vector products.
class StabilizedScaling {
 public:
  StabilizedScaling(const Matrix& scaled, const DiscreteDistribution& mu,
                    const DiscreteDistribution& nu, Vector v0)
      : s_(scaled), mu_(mu), nu_(nu), logMu_(logWeights(mu)), logNu_(logWeights(nu)),
        u_(Vector::Zero(scaled.rows())), v_(std::move(v0)),
        a_(Vector::Ones(scaled.rows())), b_(Vector::Ones(scaled.cols())) {}

  void logIteration() {
    absorb();
    const Index n = s_.rows();
    const Index m = s_.cols();
    for (Index i = 0; i < n; ++i) {
      u_[i] = logMu_[i] == kNegInf ? kNegInf
                                   : logMu_[i] - logSumExp(s_.row(i).transpose() + v_);
    }
    for (Index j = 0; j < m; ++j) {
      v_[j] = logNu_[j] == kNegInf ? kNegInf : logNu_[j] - logSumExp(s_.col(j) + u_);
    }
    rebuild();
  }

  // One scaling iteration; false when a denominator underflowed (the state
  // is then unchanged).
  bool scalingIteration() {
    Vector a(a_.size());
    for (Index i = 0; i < a.size(); ++i) {
      if (mu_[i] == 0.0) {
        a[i] = 0.0;
      } else if (ktb_[i] > 0.0) {
        a[i] = mu_[i] / ktb_[i];
      } else {
        return false;
      }
    }
    const Vector kta = kt_.transpose() * a;
    Vector b(b_.size());
    for (Index j = 0; j < b.size(); ++j) {
      if (nu_[j] == 0.0) {
        b[j] = 0.0;
      } else if (kta[j] > 0.0) {
        b[j] = nu_[j] / kta[j];
      } else {
        return false;
      }
    }
    a_ = std::move(a);
    b_ = std::move(b);
    ktb_ = kt_ * b_;
    if (drifted(a_) || drifted(b_)) {
      absorb();
      rebuild();
    }
    return true;
  }

  double rowError() const {
    double err = 0.0;
    for (Index i = 0; i < a_.size(); ++i) err += std::abs(a_[i] * ktb_[i] - mu_[i]);
    return err;
  }

  // Final potentials u + log a, v + log b.
  void finish(Vector& u, Vector& v) {
    absorb();
    u = u_;
    v = v_;
  }

 private:
  static bool drifted(const Vector& x) {
    for (Index i = 0; i < x.size(); ++i) {
      if (x[i] > 1e100 || (x[i] > 0.0 && x[i] < 1e-100)) return true;
    }
    return false;
  }

  static void absorbInto(Vector& pot, Vector& scale) {
    for (Index i = 0; i < pot.size(); ++i) {
      pot[i] = scale[i] > 0.0 ? pot[i] + std::log(scale[i]) : kNegInf;
      scale[i] = 1.0;
    }
  }

  void absorb() {
    absorbInto(u_, a_);
    absorbInto(v_, b_);
  }

  void rebuild() {
    kt_.resize(s_.rows(), s_.cols());
    for (Index j = 0; j < s_.cols(); ++j) {
      for (Index i = 0; i < s_.rows(); ++i) {
        const double e = s_(i, j) + u_[i] + v_[j];
        kt_(i, j) = e == kNegInf ? 0.0 : std::exp(e);
      }
    }
    ktb_ = kt_ * b_;
  }

  const Matrix& s_;
  const DiscreteDistribution& mu_;
  const DiscreteDistribution& nu_;
  Vector logMu_, logNu_;
  Vector u_, v_, a_, b_;
  Matrix kt_;
  Vector ktb_;
};

SinkhornResult solveLog(const Matrix& cost, const DiscreteDistribution& mu,
                        const DiscreteDistribution& nu, const SolverConfig& cfg,
                        double eps, const Vector* g0) {
  const Matrix scaled = -cost / eps;
  Vector v0 = Vector::Zero(cost.cols());
  if (g0 && g0->allFinite()) v0 = *g0 / eps;
  StabilizedScaling state(scaled, mu, nu, std::move(v0));

  SinkhornResult res;
  res.logDomain = true;
  res.epsilon = eps;
  res.errorTrace.reserve(std::min(cfg.maxSinkhornIters, 4096));

  for (int it = 1; it <= cfg.maxSinkhornIters; ++it) {
    if (it == 1 || !state.scalingIteration()) state.logIteration();
    const double err = state.rowError();
    res.iterations = it;
    res.marginalError = err;
    res.errorTrace.push_back(err);
    if (!std::isfinite(err)) {
      throw NumericalError("log-domain Sinkhorn produced a non-finite marginal error");
    }
    if (err < cfg.marginalTol) {
      res.converged = true;
      break;
    }
  }

  Vector u, v;
  state.finish(u, v);
  Matrix plan(cost.rows(), cost.cols());
  for (Index i = 0; i < plan.rows(); ++i) {
    for (Index j = 0; j < plan.cols(); ++j) {
      const double e = u[i] + v[j] + scaled(i, j);
      plan(i, j) = e == kNegInf ? 0.0 : std::exp(e);
    }
  }
  res.f = eps * u;
  res.g = eps * v;
  res.coupling = Coupling{std::move(plan), mu, nu};
  return res;
}

void requirePositive(const Vector& denom, const DiscreteDistribution& target,
                     const char* side) {
  for (Index i = 0; i < denom.size(); ++i) {
    if (target[i] > 0.0 && !(denom[i] > 0.0 && std::isfinite(denom[i]))) {
      throw KernelUnderflowError(std::string("Gibbs kernel underflow: ") + side +
                                 " scaling denominator " + std::to_string(i) +
                                 " is zero; use the log-domain solver");
    }
  }
}

SinkhornResult solveStandard(const Matrix& cost, const DiscreteDistribution& mu,
                             const DiscreteDistribution& nu, const SolverConfig& cfg,
                             double eps, const Vector* g0) {
  const Matrix kernel = gibbsKernel(cost, eps);
  const Index n = cost.rows();
  const Index m = cost.cols();
  Vector a = Vector::Ones(n);
  Vector b = Vector::Ones(m);
  if (g0) {
    const Vector warm = (*g0 / eps).unaryExpr([](double t) { return std::exp(t); });
    if (warm.allFinite() && warm.minCoeff() > 0.0) b = warm;
  }

  SinkhornResult res;
  res.logDomain = false;
  res.epsilon = eps;
  res.errorTrace.reserve(std::min(cfg.maxSinkhornIters, 4096));

  Vector kb = kernel * b;
  for (int it = 1; it <= cfg.maxSinkhornIters; ++it) {
    requirePositive(kb, mu, "row");
    a = mu.weights().cwiseQuotient(kb);
    const Vector kta = kernel.transpose() * a;
    requirePositive(kta, nu, "column");
    b = nu.weights().cwiseQuotient(kta);
    kb = kernel * b;
    const double err = (a.cwiseProduct(kb) - mu.weights()).lpNorm<1>();
    res.iterations = it;
    res.marginalError = err;
    res.errorTrace.push_back(err);
    if (!std::isfinite(err)) {
      throw KernelUnderflowError("Sinkhorn scaling overflowed; use the log-domain solver");
    }
    if (err < cfg.marginalTol) {
      res.converged = true;
      break;
    }
  }

  res.coupling = Coupling{a.asDiagonal() * kernel * b.asDiagonal(), mu, nu};
  res.f = eps * a.array().log().matrix();
  res.g = eps * b.array().log().matrix();
  return res;
}

SinkhornResult dispatch(const Matrix& cost, const DiscreteDistribution& mu,
                        const DiscreteDistribution& nu, const SolverConfig& cfg,
                        const Vector* g0) {
  checkProblem(cost, mu, nu);
  const double eps = resolveEpsilon(cost, cfg);
  const bool useLog = cfg.logDomain || (cfg.autoLogDomain && needsLogDomain(cost, eps));
  if (g0 && g0->size() != cost.cols()) throw InputError("warm-start potential has wrong size");
  return useLog ? solveLog(cost, mu, nu, cfg, eps, g0)
                : solveStandard(cost, mu, nu, cfg, eps, g0);
}

}  // namespace

Matrix gibbsKernel(const Matrix& cost, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InputError("epsilon must be a positive finite number");
  }
  checkCost(cost);
  // std::exp rather than Eigen's vectorized exp, which clamps its argument
  // near -709 and so never underflows to an exact zero.
  return (-cost / epsilon).unaryExpr([](double t) { return std::exp(t); });
}

double defaultEpsilon(const Matrix& cost) {
  checkCost(cost);
  const double mean = cost.mean();
  return mean > 0.0 ? 0.01 * mean : 1.0;
}

bool needsLogDomain(const Matrix& cost, double epsilon) {
  return epsilon < 0.05 * cost.maxCoeff();
}

SinkhornResult sinkhornSolve(const Matrix& cost, const DiscreteDistribution& mu,
                             const DiscreteDistribution& nu, const SolverConfig& cfg) {
  return dispatch(cost, mu, nu, cfg, nullptr);
}

SinkhornResult sinkhornSolveFrom(const Matrix& cost, const DiscreteDistribution& mu,
                                 const DiscreteDistribution& nu, const SolverConfig& cfg,
                                 const Vector& g0) {
  return dispatch(cost, mu, nu, cfg, &g0);
}

Matrix roundToMarginals(const Matrix& plan, const DiscreteDistribution& mu,
                        const DiscreteDistribution& nu) {
  if (plan.rows() != mu.size() || plan.cols() != nu.size()) {
    throw InputError("plan dimensions do not match the marginals");
  }
  if (!plan.allFinite() || (plan.array() < 0.0).any()) {
    throw InputError("plan must be finite and nonnegative");
  }
  Matrix out = plan;
  const Vector rows = out.rowwise().sum();
  for (Index i = 0; i < out.rows(); ++i) {
    if (rows[i] > mu[i]) out.row(i) *= mu[i] / rows[i];
  }
  const Vector cols = out.colwise().sum().transpose();
  for (Index j = 0; j < out.cols(); ++j) {
    if (cols[j] > nu[j]) out.col(j) *= nu[j] / cols[j];
  }
  const Vector rowDeficit =
      (mu.weights() - out.rowwise().sum()).cwiseMax(0.0);
  const Vector colDeficit =
      (nu.weights() - out.colwise().sum().transpose()).cwiseMax(0.0);
  const double mass = rowDeficit.sum();
  if (mass > 0.0) out += rowDeficit * colDeficit.transpose() / mass;
  return out;
}

double linearTransportCost(const Matrix& cost, const Matrix& plan) {
  if (cost.rows() != plan.rows() || cost.cols() != plan.cols()) {
    throw InputError("cost and plan dimensions differ");
  }
  return cost.cwiseProduct(plan).sum();
}

}  // namespace gwkit
