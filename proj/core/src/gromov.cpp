#include "gwkit/gromov.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "gwkit/error.hpp"

namespace gwkit {

namespace {

void checkShapes(const Matrix& cx, const Matrix& cy, const Matrix& plan) {
  if (cx.rows() != cx.cols() || cy.rows() != cy.cols()) {
    throw InputError("intra-space cost matrices must be square");
  }
  if (plan.rows() != cx.rows() || plan.cols() != cy.rows()) {
    throw InputError("coupling is " + std::to_string(plan.rows()) + "x" +
                     std::to_string(plan.cols()) + " but cost spaces have sizes " +
                     std::to_string(cx.rows()) + " and " + std::to_string(cy.rows()));
  }
}

double entropyTerm(const Matrix& plan) {
  // sum pi (log pi - 1), with 0 log 0 = 0.
  double s = 0.0;
  for (Index j = 0; j < plan.cols(); ++j) {
    for (Index i = 0; i < plan.rows(); ++i) {
      const double p = plan(i, j);
      if (p > 0.0) s += p * (std::log(p) - 1.0);
    }
  }
  return s;
}

// Runs pi <- Sinkhorn(L(lin), eps) from a linearization point `lin` (any
// nonnegative matrix; the product coupling or an anchor point mass).
GWResult descendFrom(const Matrix& cx, const Matrix& cy, const Matrix& lin,
                     const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                     const SolverConfig& cfg, double eps) {
  SolverConfig inner = cfg;
  inner.epsilon = eps;

  GWResult res;
  res.epsilon = eps;
  Matrix current = lin;
  // Warm start from the last converged projection only: an unconverged
  // potential can be far worse than a cold start.
  Vector warm;
  for (int t = 1; t <= cfg.maxOuterIters; ++t) {
    const Matrix cost = gwLinearizedCost(cx, cy, current);
    SinkhornResult step = warm.size() ? sinkhornSolveFrom(cost, mu, nu, inner, warm)
                                      : sinkhornSolve(cost, mu, nu, inner);
    if (step.converged) {
      warm = step.g;
    } else {
      warm.resize(0);
    }
    res.projectionError = step.marginalError;
    res.projectionConverged = step.converged;
    Matrix next = step.converged ? std::move(step.coupling.plan)
                                 : roundToMarginals(step.coupling.plan, mu, nu);
    const double change = (next - current).lpNorm<1>();
    current = std::move(next);
    res.outerIterations = t;
    res.objectiveTrace.push_back(gwObjective(cx, cy, current));
    res.entropicTrace.push_back(res.objectiveTrace.back() + 2.0 * eps * entropyTerm(current));
    if (change < cfg.marginalTol) {
      res.converged = true;
      break;
    }
  }
  res.transportCost = std::max(0.0, res.objectiveTrace.back());
  res.entropicObjective = res.entropicTrace.back();
  res.coupling = Coupling{std::move(current), mu, nu};
  return res;
}

constexpr int kScreenSinkhornIters = 1000;
constexpr int kScreenOuterIters = 50;
constexpr double kScreenTol = 1e-6;
constexpr std::size_t kPolished = 3;

double resolveGwEpsilon(const Matrix& cx, const Matrix& cy, const SolverConfig& cfg) {
  if (cfg.epsilon) return *cfg.epsilon;
  const double mean = gwMeanCost(cx, cy);
  return mean > 0.0 ? 0.01 * mean : 1.0;
}

}  // namespace

Matrix gwLinearizedCost(const Matrix& cx, const Matrix& cy, const Matrix& plan) {
  checkShapes(cx, cy, plan);
  const Vector p = plan.rowwise().sum();
  const Vector q = plan.colwise().sum().transpose();
  const Vector rowTerm = cx.cwiseProduct(cx) * p;
  const Vector colTerm = cy.cwiseProduct(cy) * q;
  Matrix l = -2.0 * (cx * plan * cy.transpose());
  l.colwise() += rowTerm;
  l.rowwise() += colTerm.transpose();
  return l;
}

Matrix gwLinearizedCost(const IntraCostMatrix& cx, const IntraCostMatrix& cy,
                        const Coupling& pi) {
  return gwLinearizedCost(cx.costs(), cy.costs(), pi.plan);
}

double gwObjective(const Matrix& cx, const Matrix& cy, const Matrix& plan) {
  return gwLinearizedCost(cx, cy, plan).cwiseProduct(plan).sum();
}

double gwMeanCost(const Matrix& cx, const Matrix& cy) {
  // mean (a - b)^2 over independent a in cx, b in cy.
  return cx.cwiseProduct(cx).mean() + cy.cwiseProduct(cy).mean() -
         2.0 * cx.mean() * cy.mean();
}

Matrix gwCostGradient(const Matrix& cx, const Matrix& cy, const Matrix& plan) {
  checkShapes(cx, cy, plan);
  const Vector q = plan.colwise().sum().transpose();
  const Matrix cross = plan.transpose() * cx * plan;
  return -2.0 * (cross - cy.cwiseProduct(q * q.transpose()));
}

GWResult gwDescend(const Matrix& cx, const Matrix& cy, const Coupling& start,
                   const SolverConfig& cfg) {
  cfg.validate();
  if (!cfg.epsilon) throw InputError("gwDescend needs an explicit epsilon");
  checkShapes(cx, cy, start.plan);
  return descendFrom(cx, cy, start.plan, start.rowMarginal, start.colMarginal, cfg,
                     *cfg.epsilon);
}

GWResult gwSolveCosts(const Matrix& cx, const Matrix& cy, const DiscreteDistribution& mu,
                      const DiscreteDistribution& nu, const SolverConfig& cfg) {
  cfg.validate();
  const Index n = cx.rows();
  const Index m = cy.rows();
  if (n < 1 || m < 1) throw InputError("cost spaces must be non-empty");
  if (mu.size() != n || nu.size() != m) {
    throw InputError("marginal sizes do not match the batch sizes");
  }
  if (!cx.allFinite() || !cy.allFinite()) {
    throw InputError("intra-space costs must be finite");
  }
  const double eps = resolveGwEpsilon(cx, cy, cfg);

  const Matrix product = mu.weights() * nu.weights().transpose();
  if (static_cast<long long>(n) * m > cfg.maxAnchorStarts) {
    return descendFrom(cx, cy, product, mu, nu, cfg, eps);
  }

  // Multi-start. Every start is first descended cheaply, which is enough to
  // tell which basin it falls into; the few best screened plans are then
  // descended to full accuracy. Full-accuracy runs from poor starts are
  // expensive at small eps, where Sinkhorn converges sublinearly.
  SolverConfig screen = cfg;
  screen.maxSinkhornIters = std::min(cfg.maxSinkhornIters, kScreenSinkhornIters);
  screen.maxOuterIters = std::min(cfg.maxOuterIters, kScreenOuterIters);
  screen.marginalTol = std::max(cfg.marginalTol, kScreenTol);

  struct Screened {
    double cost;
    int start;
    Matrix plan;
  };
  std::vector<Screened> screened;
  screened.reserve(static_cast<std::size_t>(n * m + 1));
  {
    GWResult r = descendFrom(cx, cy, product, mu, nu, screen, eps);
    screened.push_back({r.transportCost, 0, std::move(r.coupling.plan)});
  }
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      Matrix anchor = Matrix::Zero(n, m);
      anchor(i, j) = 1.0;
      GWResult r = descendFrom(cx, cy, anchor, mu, nu, screen, eps);
      screened.push_back({r.transportCost, static_cast<int>(1 + i * m + j),
                          std::move(r.coupling.plan)});
    }
  }
  const std::size_t keep = std::min(kPolished, screened.size());
  std::partial_sort(screened.begin(), screened.begin() + static_cast<long>(keep),
                    screened.end(), [](const Screened& l, const Screened& r) {
                      return l.cost < r.cost || (l.cost == r.cost && l.start < r.start);
                    });

  GWResult best;
  for (std::size_t s = 0; s < keep; ++s) {
    GWResult candidate = descendFrom(cx, cy, screened[s].plan, mu, nu, cfg, eps);
    candidate.start = screened[s].start;
    const double slack = 1e-12 * (1.0 + best.transportCost);
    if (s == 0 || candidate.transportCost < best.transportCost - slack) {
      best = std::move(candidate);
    }
  }
  return best;
}

GWResult gwSolve(const IntraCostMatrix& cx, const IntraCostMatrix& cy,
                 const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                 const SolverConfig& cfg) {
  return gwSolveCosts(cx.costs(), cy.costs(), mu, nu, cfg);
}

GWResult gwSolve(const FeatureBatch& x, const FeatureBatch& y,
                 const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                 const SolverConfig& cfg) {
  return gwSolve(intraCosts(x), intraCosts(y), mu, nu, cfg);
}

namespace {

// Objective as a quadratic form over the flattened plan.
class QuadraticObjective {
 public:
  QuadraticObjective(const Matrix& cx, const Matrix& cy) : n_(cx.rows()) {
    const Index nn = n_ * n_;
    q_ = Matrix(nn, nn);
    for (Index i = 0; i < n_; ++i)
      for (Index j = 0; j < n_; ++j)
        for (Index k = 0; k < n_; ++k)
          for (Index l = 0; l < n_; ++l) {
            const double d = cx(i, k) - cy(j, l);
            q_(i * n_ + j, k * n_ + l) = d * d;
          }
  }

  template <std::size_t N>
  double operator()(const std::array<double, N>& flat) const {
    double s = 0.0;
    for (std::size_t a = 0; a < N; ++a) {
      if (flat[a] == 0.0) continue;
      double inner = 0.0;
      for (std::size_t b = 0; b < N; ++b) inner += q_(a, b) * flat[b];
      s += flat[a] * inner;
    }
    return s;
  }

 private:
  Index n_;
  Matrix q_;
};

std::vector<double> gridValues(double lo, double hi, double step) {
  std::vector<double> values;
  for (long k = 0;; ++k) {
    const double v = lo + static_cast<double>(k) * step;
    if (v >= hi - 1e-12 * std::max(1.0, std::abs(hi))) break;
    values.push_back(v);
  }
  values.push_back(hi);
  return values;
}

constexpr double kFeasSlack = 1e-12;

// Doubly-stochastic 3x3 completion of the free block (d11, d12, d21, d22),
// scaled by 1/3. Returns false when some entry is negative.
bool completeThree(const std::array<double, 4>& d, std::array<double, 9>& flat) {
  const double d13 = 1.0 - d[0] - d[1];
  const double d23 = 1.0 - d[2] - d[3];
  const double d31 = 1.0 - d[0] - d[2];
  const double d32 = 1.0 - d[1] - d[3];
  const double d33 = d[0] + d[1] + d[2] + d[3] - 1.0;
  const std::array<double, 9> full{d[0], d[1], d13, d[2], d[3], d23, d31, d32, d33};
  for (std::size_t a = 0; a < 9; ++a) {
    if (full[a] < -kFeasSlack) return false;
    flat[a] = std::max(0.0, full[a]) / 3.0;
  }
  return true;
}

struct Scored {
  double value;
  std::array<double, 4> params;
};

GWResult bruteForceThree(const Matrix& cx, const Matrix& cy, double step) {
  const QuadraticObjective objective(cx, cy);
  const auto values = gridValues(0.0, 1.0, step);
  std::vector<Scored> scored;
  std::array<double, 9> flat{};
  for (const double a : values)
    for (const double b : values) {
      if (a + b > 1.0 + kFeasSlack) break;
      for (const double c : values) {
        if (a + c > 1.0 + kFeasSlack) break;
        for (const double d : values) {
          const std::array<double, 4> params{a, b, c, d};
          if (!completeThree(params, flat)) continue;
          scored.push_back({objective(flat), params});
        }
      }
    }

  constexpr std::size_t kRefine = 16;
  const std::size_t keep = std::min(kRefine, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(keep), scored.end(),
                    [](const Scored& l, const Scored& r) { return l.value < r.value; });

  Scored best = scored.front();
  for (std::size_t s = 0; s < keep; ++s) {
    Scored cur = scored[s];
    for (double h = step / 2.0; h > 1e-9; h /= 2.0) {
      bool moved = true;
      while (moved) {
        moved = false;
        Scored local = cur;
        for (int o0 = -2; o0 <= 2; ++o0)
          for (int o1 = -2; o1 <= 2; ++o1)
            for (int o2 = -2; o2 <= 2; ++o2)
              for (int o3 = -2; o3 <= 2; ++o3) {
                std::array<double, 4> p{cur.params[0] + o0 * h, cur.params[1] + o1 * h,
                                        cur.params[2] + o2 * h, cur.params[3] + o3 * h};
                bool inBox = true;
                for (auto& v : p) {
                  if (v < -kFeasSlack || v > 1.0 + kFeasSlack) inBox = false;
                  v = std::clamp(v, 0.0, 1.0);
                }
                if (!inBox || !completeThree(p, flat)) continue;
                const double val = objective(flat);
                if (val < local.value - 1e-15) local = {val, p};
              }
        if (local.value < cur.value - 1e-15) {
          cur = local;
          moved = true;
        }
      }
    }
    if (cur.value < best.value) best = cur;
  }

  completeThree(best.params, flat);
  Matrix plan(3, 3);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) plan(i, j) = flat[i * 3 + j];
  GWResult res;
  res.transportCost = std::max(0.0, best.value);
  res.entropicObjective = res.transportCost;
  res.coupling = Coupling{std::move(plan), uniformDistribution(3), uniformDistribution(3)};
  res.converged = true;
  res.objectiveTrace = {res.transportCost};
  res.entropicTrace = {res.transportCost};
  return res;
}

GWResult bruteForceTwo(const Matrix& cx, const Matrix& cy, double step) {
  const QuadraticObjective objective(cx, cy);
  auto eval = [&](double t) {
    t = std::clamp(t, 0.0, 0.5);
    return objective(std::array<double, 4>{t, 0.5 - t, 0.5 - t, t});
  };
  double bestT = 0.0;
  double bestV = std::numeric_limits<double>::infinity();
  for (const double t : gridValues(0.0, 0.5, step)) {
    const double v = eval(t);
    if (v < bestV) {
      bestV = v;
      bestT = t;
    }
  }
  for (double h = step / 2.0; h > 1e-12; h /= 2.0) {
    for (const double t : {bestT - h, bestT + h}) {
      if (t < 0.0 || t > 0.5) continue;
      const double v = eval(t);
      if (v < bestV) {
        bestV = v;
        bestT = t;
      }
    }
  }
  Matrix plan(2, 2);
  plan << bestT, 0.5 - bestT, 0.5 - bestT, bestT;
  GWResult res;
  res.transportCost = std::max(0.0, bestV);
  res.entropicObjective = res.transportCost;
  res.coupling = Coupling{std::move(plan), uniformDistribution(2), uniformDistribution(2)};
  res.converged = true;
  res.objectiveTrace = {res.transportCost};
  res.entropicTrace = {res.transportCost};
  return res;
}

}  // namespace

GWResult gwBruteForce(const IntraCostMatrix& cx, const IntraCostMatrix& cy,
                      double gridStep) {
  const Index n = cx.size();
  if (cy.size() != n) throw InputError("brute force requires equal sizes n = m");
  if (n > 3) throw InputError("brute force supports n <= 3 only");
  if (!(gridStep > 0.0) || gridStep > 0.5) {
    throw InputError("grid step must lie in (0, 0.5]");
  }
  if (n == 1) {
    GWResult res;
    res.coupling = Coupling{Matrix::Ones(1, 1), uniformDistribution(1), uniformDistribution(1)};
    res.converged = true;
    res.objectiveTrace = {0.0};
    res.entropicTrace = {0.0};
    return res;
  }
  return n == 2 ? bruteForceTwo(cx.costs(), cy.costs(), gridStep)
                : bruteForceThree(cx.costs(), cy.costs(), gridStep);
}

}  // namespace gwkit
