#include "pricecast/optim.hpp"

#include "support.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

using namespace pricecast;

namespace {

double rosenbrock(const Eigen::VectorXd& x) {
    const double a = 1.0 - x(0);
    const double b = x(1) - x(0) * x(0);
    return a * a + 100.0 * b * b;
}

double rosenbrock_grad(const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    const double a = 1.0 - x(0);
    const double b = x(1) - x(0) * x(0);
    grad.resize(2);
    grad(0) = -2.0 * a - 400.0 * x(0) * b;
    grad(1) = 200.0 * b;
    return a * a + 100.0 * b * b;
}

}

TEST_CASE("nelder_mead minimises smooth convex objectives") {
    const auto quadratic = [](const Eigen::VectorXd& x) {
        return (x(0) - 3.0) * (x(0) - 3.0) + 2.0 * (x(1) + 1.0) * (x(1) + 1.0);
    };
    const auto result = optim::nelder_mead(quadratic, Eigen::VectorXd::Zero(2));
    CHECK(result.converged);
    CHECK(result.x(0) == doctest::Approx(3.0).epsilon(1e-4));
    CHECK(result.x(1) == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(result.value == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("nelder_mead handles the Rosenbrock valley") {
    optim::NelderMeadOptions opts;
    opts.max_iters = 5000;
    Eigen::VectorXd start(2);
    start << -1.2, 1.0;
    const auto result = optim::nelder_mead(rosenbrock, start, opts);
    CHECK(result.value < 1e-6);
    CHECK(result.x(0) == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(result.x(1) == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("nelder_mead returns zero-dimensional input untouched") {
    int evals = 0;
    const auto constant = [&evals](const Eigen::VectorXd&) {
        ++evals;
        return 7.5;
    };
    const auto result = optim::nelder_mead(constant, Eigen::VectorXd(0));
    CHECK(result.x.size() == 0);
    CHECK(result.value == doctest::Approx(7.5));
    CHECK(evals == 1);
}

TEST_CASE("lbfgs converges on a quadratic to gradient tolerance") {
    const optim::GradObjective objective = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        grad = 2.0 * x;
        return x.squaredNorm();
    };
    const auto result = optim::lbfgs_minimize(objective, Eigen::VectorXd::Constant(5, 4.0));
    CHECK(result.converged);
    CHECK(result.grad_norm < 1e-8);
    CHECK(result.x.cwiseAbs().maxCoeff() < 1e-8);
    CHECK(result.iterations < 20);
}

TEST_CASE("lbfgs follows the Rosenbrock valley to the optimum") {
    Eigen::VectorXd start(2);
    start << -1.2, 1.0;
    const auto result = optim::lbfgs_minimize(rosenbrock_grad, start);
    CHECK(result.converged);
    CHECK(result.x(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(result.x(1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("lbfgs copes with a smoothed absolute-value objective") {
    // The same smoothing the changepoint prior uses, so kinks near zero
    // stay differentiable.
    const double eps = 1e-8;
    const optim::GradObjective objective = [eps](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        double value = 0.0;
        grad.resize(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double root = std::sqrt(x(i) * x(i) + eps * eps);
            value += root;
            grad(i) = x(i) / root;
        }
        return value;
    };
    const auto result = optim::lbfgs_minimize(objective, Eigen::VectorXd::Constant(4, 2.0));
    CHECK(result.x.cwiseAbs().maxCoeff() < 1e-4);
}
