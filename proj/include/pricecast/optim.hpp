#pragma once

#include <Eigen/Dense>

#include <functional>

namespace pricecast::optim {

struct NelderMeadOptions {
    double initial_step = 0.1;     // edge length of the starting simplex
    double f_tol = 1e-10;          // spread of simplex values at convergence
    int max_iters = 2000;
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Derivative-free simplex minimisation with the standard reflection,
/// expansion, contraction, and shrink moves. Zero-dimensional inputs are
/// returned as-is with the objective evaluated once.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                             const Eigen::VectorXd& start, const NelderMeadOptions& opts = {});

struct LbfgsOptions {
    int memory = 10;
    double grad_tol = 1e-8;        // stop when the gradient 2-norm drops below
    int max_iters = 500;
    int max_evals_per_line = 60;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Objective contract: returns f(x) and fills grad with the gradient.
using GradObjective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

/**
 * @brief Limited-memory BFGS with a strong-Wolfe line search.
 *
 * The search direction comes from the usual two-loop recursion with the
 * scaled-identity seed H0 = (s.y / y.y) I; curvature pairs with
 * non-positive s.y are skipped. The line search brackets and zooms per
 * Nocedal-Wright, falling back to the best point seen when it cannot
 * satisfy both Wolfe conditions in the evaluation budget.
 */
LbfgsResult lbfgs_minimize(const GradObjective& objective, const Eigen::VectorXd& start,
                           const LbfgsOptions& opts = {});

}
