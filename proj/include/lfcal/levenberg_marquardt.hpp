#pragma once

#include "lfcal/types.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>

namespace lfcal {

struct LmOptions {
  int max_iterations = 100;
  double initial_lambda = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 10.0;
  double max_lambda = 1e14;
  double cost_change_tol = 1e-12;  // relative decrease per accepted step
  double gradient_tol = 1e-12;     // infinity norm of J^T r
};

struct LmSummary {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
};

/// Levenberg-Marquardt on prebuilt normal equations.
///
/// `build(x, H, g)` must fill H = J^T J and g = J^T r for the residual at x
/// and return the cost sum r^T r; `cost(x)` returns the cost alone. Damping
/// is multiplicative on the diagonal (H + lambda diag(H)), which keeps steps
/// sane when parameter scales differ by orders of magnitude. Steps that do
/// not decrease the cost are rejected and lambda is raised, so the cost
/// sequence the caller observes is monotone by construction.
inline LmSummary lm_minimize(
    Eigen::VectorXd& x,
    const std::function<double(const Eigen::VectorXd&, Eigen::MatrixXd&, Eigen::VectorXd&)>& build,
    const std::function<double(const Eigen::VectorXd&)>& cost, const LmOptions& opt = {}) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd h(n, n);
  Eigen::VectorXd g(n);

  LmSummary summary;
  double current = build(x, h, g);
  summary.initial_cost = current;
  summary.final_cost = current;
  double lambda = opt.initial_lambda;

  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    summary.iterations = iter + 1;
    if (g.lpNorm<Eigen::Infinity>() < opt.gradient_tol || current < 1e-25) {
      summary.converged = true;
      break;
    }

    bool accepted = false;
    while (lambda <= opt.max_lambda) {
      Eigen::MatrixXd damped = h;
      for (int i = 0; i < n; ++i) {
        const double d = h(i, i);
        damped(i, i) = d + lambda * (d > 0.0 ? d : 1.0);
      }
      const Eigen::VectorXd step = damped.ldlt().solve(-g);
      if (!step.allFinite()) {
        lambda *= opt.lambda_up;
        continue;
      }
      const Eigen::VectorXd candidate = x + step;
      const double candidate_cost = cost(candidate);
      if (std::isfinite(candidate_cost) && candidate_cost < current) {
        const double improvement = (current - candidate_cost) / std::max(current, 1e-300);
        x = candidate;
        current = candidate_cost;
        lambda = std::max(lambda / opt.lambda_down, 1e-12);
        accepted = true;
        if (improvement < opt.cost_change_tol) summary.converged = true;
        break;
      }
      lambda *= opt.lambda_up;
    }

    summary.final_cost = current;
    if (!accepted || summary.converged) {
      summary.converged = summary.converged || !accepted;
      break;
    }
    current = build(x, h, g);
    summary.final_cost = current;
  }
  return summary;
}

}  // namespace lfcal
