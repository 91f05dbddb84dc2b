#include "pricecast/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <vector>

namespace pricecast::optim {

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                             const Eigen::VectorXd& start, const NelderMeadOptions& opts) {
    const Eigen::Index dim = start.size();
    NelderMeadResult result;
    if (dim == 0) {
        result.x = start;
        result.value = objective(start);
        result.converged = true;
        return result;
    }

    struct Vertex {
        Eigen::VectorXd x;
        double f;
    };
    std::vector<Vertex> simplex;
    simplex.reserve(std::size_t(dim) + 1);
    simplex.push_back({start, objective(start)});
    for (Eigen::Index i = 0; i < dim; ++i) {
        Eigen::VectorXd v = start;
        v(i) += opts.initial_step;
        simplex.push_back({v, objective(v)});
    }
    auto by_value = [](const Vertex& a, const Vertex& b) { return a.f < b.f; };
    std::sort(simplex.begin(), simplex.end(), by_value);

    constexpr double kReflect = 1.0;
    constexpr double kExpand = 2.0;
    constexpr double kContract = 0.5;
    constexpr double kShrink = 0.5;

    int iter = 0;
    for (; iter < opts.max_iters; ++iter) {
        const double spread = simplex.back().f - simplex.front().f;
        if (spread <= opts.f_tol * (std::fabs(simplex.front().f) + opts.f_tol)) {
            result.converged = true;
            break;
        }
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
        for (std::size_t i = 0; i + 1 < simplex.size(); ++i) {
            centroid += simplex[i].x;
        }
        centroid /= double(dim);
        Vertex& worst = simplex.back();

        const Eigen::VectorXd xr = centroid + kReflect * (centroid - worst.x);
        const double fr = objective(xr);
        if (fr < simplex.front().f) {
            const Eigen::VectorXd xe = centroid + kExpand * (xr - centroid);
            const double fe = objective(xe);
            if (fe < fr) {
                worst = {xe, fe};
            } else {
                worst = {xr, fr};
            }
        } else if (fr < simplex[simplex.size() - 2].f) {
            worst = {xr, fr};
        } else {
            const bool outside = fr < worst.f;
            const Eigen::VectorXd base = outside ? xr : worst.x;
            const Eigen::VectorXd xc = centroid + kContract * (base - centroid);
            const double fc = objective(xc);
            if (fc < std::min(fr, worst.f)) {
                worst = {xc, fc};
            } else {
                for (std::size_t i = 1; i < simplex.size(); ++i) {
                    simplex[i].x = simplex.front().x + kShrink * (simplex[i].x - simplex.front().x);
                    simplex[i].f = objective(simplex[i].x);
                }
            }
        }
        std::sort(simplex.begin(), simplex.end(), by_value);
    }
    result.x = simplex.front().x;
    result.value = simplex.front().f;
    result.iterations = iter;
    return result;
}

namespace {

struct LinePoint {
    double alpha;
    double f;
    double slope;
};

}

LbfgsResult lbfgs_minimize(const GradObjective& objective, const Eigen::VectorXd& start,
                           const LbfgsOptions& opts) {
    const Eigen::Index dim = start.size();
    Eigen::VectorXd x = start;
    Eigen::VectorXd grad(dim);
    double f = objective(x, grad);
    if (!std::isfinite(f)) {
        throw std::runtime_error("lbfgs_minimize: objective not finite at the start point");
    }

    std::deque<Eigen::VectorXd> s_hist;
    std::deque<Eigen::VectorXd> y_hist;
    std::deque<double> rho_hist;

    LbfgsResult result;
    int iter = 0;
    for (; iter < opts.max_iters; ++iter) {
        if (grad.norm() < opts.grad_tol) {
            result.converged = true;
            break;
        }

        // Two-loop recursion for d = -H g.
        Eigen::VectorXd q = grad;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t i = s_hist.size(); i-- > 0;) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        if (!s_hist.empty()) {
            const double gamma =
                s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            q *= gamma;
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(q);
            q += s_hist[i] * (alpha[i] - beta);
        }
        Eigen::VectorXd dir = -q;
        double slope0 = grad.dot(dir);
        if (slope0 >= 0.0) {
            // Curvature information went bad; restart from steepest descent.
            dir = -grad;
            slope0 = -grad.squaredNorm();
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        // Strong-Wolfe line search along dir.
        const double f0 = f;
        Eigen::VectorXd trial_grad(dim);
        Eigen::VectorXd best_x = x;
        Eigen::VectorXd best_grad = grad;
        double best_f = f;
        int evals = 0;
        auto phi = [&](double a, LinePoint& p) {
            const Eigen::VectorXd xt = x + a * dir;
            const double ft = objective(xt, trial_grad);
            ++evals;
            p = {a, ft, trial_grad.dot(dir)};
            if (std::isfinite(ft) && ft < best_f) {
                best_f = ft;
                best_x = xt;
                best_grad = trial_grad;
            }
        };
        auto wolfe_ok = [&](const LinePoint& p) {
            return p.f <= f0 + opts.wolfe_c1 * p.alpha * slope0 &&
                   std::fabs(p.slope) <= opts.wolfe_c2 * std::fabs(slope0);
        };

        LinePoint cur{};
        bool accepted = false;
        // Shrinks [a, b] until a point satisfies both Wolfe conditions.
        // Invariant: a has the lower objective of the two ends.
        auto zoom = [&](LinePoint a, LinePoint b) {
            while (evals < opts.max_evals_per_line) {
                LinePoint mid{};
                phi(0.5 * (a.alpha + b.alpha), mid);
                if (wolfe_ok(mid)) {
                    cur = mid;
                    accepted = true;
                    return;
                }
                if (!std::isfinite(mid.f) || mid.f > f0 + opts.wolfe_c1 * mid.alpha * slope0 ||
                    mid.f >= a.f) {
                    b = mid;
                } else {
                    if (mid.slope * (b.alpha - a.alpha) >= 0.0) {
                        b = a;
                    }
                    a = mid;
                }
                if (std::fabs(b.alpha - a.alpha) < 1e-14) {
                    return;
                }
            }
        };
        double alpha_try = 1.0;
        LinePoint prev{0.0, f0, slope0};
        while (evals < opts.max_evals_per_line) {
            phi(alpha_try, cur);
            if (!std::isfinite(cur.f) || cur.f > f0 + opts.wolfe_c1 * cur.alpha * slope0 ||
                (cur.f >= prev.f && prev.alpha > 0.0)) {
                zoom(prev, cur);
                break;
            }
            if (wolfe_ok(cur)) {
                accepted = true;
                break;
            }
            if (cur.slope >= 0.0) {
                zoom(cur, prev);
                break;
            }
            prev = cur;
            alpha_try *= 2.0;
            if (alpha_try > 1e8) {
                break;
            }
        }

        Eigen::VectorXd x_new;
        Eigen::VectorXd grad_new(dim);
        double f_new;
        if (accepted) {
            x_new = x + cur.alpha * dir;
            f_new = objective(x_new, grad_new);
        } else if (best_f < f0) {
            x_new = best_x;
            f_new = best_f;
            grad_new = best_grad;
        } else {
            // No progress possible along this direction; give up here.
            break;
        }

        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = grad_new - grad;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            rho_hist.push_back(1.0 / sy);
            if (int(s_hist.size()) > opts.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        x = std::move(x_new);
        f = f_new;
        grad = std::move(grad_new);
    }

    result.x = x;
    result.value = f;
    result.grad_norm = grad.norm();
    result.iterations = iter;
    if (grad.norm() < opts.grad_tol) {
        result.converged = true;
    }
    return result;
}

}
