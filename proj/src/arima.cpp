#include "pricecast/arima.hpp"

#include "pricecast/optim.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace pricecast::arima {

namespace {

constexpr double kHugeValue = 1e300;

void validate_spec(const ArimaSpec& spec) {
    if (spec.p < 0 || spec.q < 0) {
        throw std::invalid_argument("arima: negative order");
    }
    if (spec.d != 0 && spec.d != 1) {
        throw std::invalid_argument("arima: only d = 0 and d = 1 are supported");
    }
}

/// Smallest root modulus of the polynomial 1 + c_1 z + ... + c_k z^k.
/// Infinite when every coefficient is zero (the polynomial is constant).
double min_root_modulus(const Eigen::VectorXd& coeffs) {
    int degree = int(coeffs.size());
    while (degree > 0 && coeffs(degree - 1) == 0.0) {
        --degree;
    }
    if (degree == 0) {
        return std::numeric_limits<double>::infinity();
    }
    // Monic form z^k + (c_{k-1}/c_k) z^{k-1} + ... + (1/c_k); companion
    // eigenvalues are the roots.
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
    for (int i = 1; i < degree; ++i) {
        companion(i, i - 1) = 1.0;
    }
    const double lead = coeffs(degree - 1);
    companion(0, degree - 1) = -1.0 / lead;
    for (int i = 1; i < degree; ++i) {
        companion(i, degree - 1) = -coeffs(i - 1) / lead;
    }
    const Eigen::VectorXcd roots = companion.eigenvalues();
    double min_mod = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < roots.size(); ++i) {
        min_mod = std::min(min_mod, std::abs(roots(i)));
    }
    return min_mod;
}

bool near_boundary(const Eigen::VectorXd& phi, const Eigen::VectorXd& theta) {
    // AR polynomial 1 - phi_1 z - ...; MA polynomial 1 + theta_1 z + ...
    // A root modulus at or below 1.001 means the process is effectively
    // non-stationary or non-invertible.
    constexpr double kMargin = 1.001;
    if (phi.size() > 0 && min_root_modulus(-phi) <= kMargin) {
        return true;
    }
    if (theta.size() > 0 && min_root_modulus(theta) <= kMargin) {
        return true;
    }
    return false;
}

}

CssEval css_objective(const Eigen::VectorXd& phi, const Eigen::VectorXd& theta,
                      const std::vector<double>& w) {
    const int p = int(phi.size());
    const int q = int(theta.size());
    const std::size_t m = std::size_t(std::max(p, q));
    if (w.size() < m + 5) {
        throw std::invalid_argument("css_objective: series shorter than max(p, q) + 5");
    }
    const std::size_t n = w.size() - m;
    CssEval eval;
    eval.residuals.assign(w.size(), 0.0);
    double ssq = 0.0;
    for (std::size_t t = m; t < w.size(); ++t) {
        double e = w[t];
        for (int i = 1; i <= p; ++i) {
            e -= phi(i - 1) * w[t - std::size_t(i)];
        }
        for (int j = 1; j <= q; ++j) {
            e -= theta(j - 1) * eval.residuals[t - std::size_t(j)];
        }
        eval.residuals[t] = e;
        ssq += e * e;
    }
    eval.residuals.erase(eval.residuals.begin(), eval.residuals.begin() + long(m));
    if (!std::isfinite(ssq) || ssq <= 0.0) {
        eval.value = kHugeValue;
        return eval;
    }
    const double sigma2 = ssq / double(n);
    eval.value = 0.5 * double(n) * (std::log(2.0 * std::numbers::pi) + std::log(sigma2) + 1.0);
    return eval;
}

ArimaFit fit_arima(const std::vector<double>& series, const ArimaSpec& spec) {
    validate_spec(spec);
    const std::vector<double> w = spec.d == 0 ? series : stats::diff(series, spec.d);
    const int dim = spec.param_count();
    const std::size_t m = std::size_t(std::max(spec.p, spec.q));
    if (w.size() < m + 5) {
        throw std::invalid_argument("fit_arima: series too short for this order");
    }

    auto unpack = [&](const Eigen::VectorXd& x) {
        return std::pair<Eigen::VectorXd, Eigen::VectorXd>(x.head(spec.p), x.tail(spec.q));
    };
    auto objective = [&](const Eigen::VectorXd& x) {
        const auto [phi, theta] = unpack(x);
        return css_objective(phi, theta, w).value;
    };

    Eigen::VectorXd best_x = Eigen::VectorXd::Zero(dim);
    double best_value = objective(best_x);
    if (dim > 0) {
        // Deterministic multi-start: zeros plus three 0.1-sized
        // perturbations. CSS surfaces for mixed models have local minima,
        // and restarts are cheap at these dimensions.
        std::vector<Eigen::VectorXd> starts;
        starts.push_back(Eigen::VectorXd::Zero(dim));
        starts.push_back(Eigen::VectorXd::Constant(dim, 0.1));
        starts.push_back(Eigen::VectorXd::Constant(dim, -0.1));
        Eigen::VectorXd alternating(dim);
        for (int i = 0; i < dim; ++i) {
            alternating(i) = i % 2 == 0 ? 0.1 : -0.1;
        }
        starts.push_back(alternating);
        optim::NelderMeadOptions opts;
        opts.initial_step = 0.1;
        opts.max_iters = 500 * dim;
        for (const auto& start : starts) {
            const auto result = optim::nelder_mead(objective, start, opts);
            if (result.value < best_value) {
                best_value = result.value;
                best_x = result.x;
            }
        }
    }

    const auto [phi, theta] = unpack(best_x);
    const CssEval eval = css_objective(phi, theta, w);
    const std::size_t n = w.size() - m;
    ArimaFit fit;
    fit.spec = spec;
    fit.phi = phi;
    fit.theta = theta;
    fit.residuals = eval.residuals;
    double ssq = 0.0;
    for (double e : eval.residuals) {
        ssq += e * e;
    }
    fit.sigma2 = ssq / double(n);
    fit.loglik = -eval.value;
    fit.bic = double(spec.param_count() + 1) * std::log(double(n)) + 2.0 * eval.value;
    fit.boundary_warning = near_boundary(phi, theta);
    return fit;
}

std::vector<ArimaSpec> default_grid(int pmax, int qmax, int d) {
    if (pmax < 0 || qmax < 0) {
        throw std::invalid_argument("default_grid: negative bound");
    }
    std::vector<ArimaSpec> grid;
    for (int p = 0; p <= pmax; ++p) {
        for (int q = 0; q <= qmax; ++q) {
            grid.push_back(ArimaSpec{p, d, q});
        }
    }
    return grid;
}

ArimaFit select_arima(const std::vector<double>& series,
                      const std::vector<ArimaSpec>& candidates) {
    if (candidates.empty()) {
        throw std::invalid_argument("select_arima: no candidates");
    }
    ArimaFit best;
    bool have_best = false;
    for (const auto& spec : candidates) {
        ArimaFit fit = fit_arima(series, spec);
        if (!have_best) {
            best = std::move(fit);
            have_best = true;
            continue;
        }
        const double tol = 1e-9 * std::max(1.0, std::fabs(best.bic));
        const bool tie = std::fabs(fit.bic - best.bic) <= tol;
        bool better = false;
        if (!tie) {
            better = fit.bic < best.bic;
        } else if (fit.spec.param_count() != best.spec.param_count()) {
            better = fit.spec.param_count() < best.spec.param_count();
        } else {
            better = fit.spec.q < best.spec.q;
        }
        if (better) {
            best = std::move(fit);
        }
    }
    return best;
}

RollingForecast rolling_forecast(const ArimaFit& fit, const std::vector<double>& log_prices,
                                 std::size_t test_start, bool refit_each_step) {
    const ArimaSpec& spec = fit.spec;
    const std::size_t m = std::size_t(std::max(spec.p, spec.q));
    const std::size_t warmup = std::size_t(spec.d) + m + 1;
    if (test_start < warmup || test_start >= log_prices.size()) {
        throw std::invalid_argument("rolling_forecast: test_start leaves no usable history");
    }

    RollingForecast out;
    out.start = test_start;
    Eigen::VectorXd phi = fit.phi;
    Eigen::VectorXd theta = fit.theta;

    const std::vector<double> w =
        spec.d == 0 ? log_prices : stats::diff(log_prices, spec.d);
    // Residuals are rebuilt over the full history with the active
    // coefficients; observed values keep feeding the recursion through the
    // test stretch (teacher forcing).
    std::vector<double> resid(w.size(), 0.0);
    auto refresh_residuals = [&]() {
        for (std::size_t t = m; t < w.size(); ++t) {
            double e = w[t];
            for (int i = 1; i <= spec.p; ++i) {
                e -= phi(i - 1) * w[t - std::size_t(i)];
            }
            for (int j = 1; j <= spec.q; ++j) {
                e -= theta(j - 1) * resid[t - std::size_t(j)];
            }
            resid[t] = e;
        }
    };
    refresh_residuals();

    for (std::size_t t = test_start; t < log_prices.size(); ++t) {
        if (refit_each_step) {
            const std::vector<double> history(log_prices.begin(),
                                              log_prices.begin() + long(t));
            const ArimaFit refit = fit_arima(history, spec);
            phi = refit.phi;
            theta = refit.theta;
            refresh_residuals();
        }
        const std::size_t wi = t - std::size_t(spec.d);     // w index aligned with series index t
        double what = 0.0;
        for (int i = 1; i <= spec.p; ++i) {
            what += phi(i - 1) * w[wi - std::size_t(i)];
        }
        for (int j = 1; j <= spec.q; ++j) {
            what += theta(j - 1) * resid[wi - std::size_t(j)];
        }
        const double prev_price = std::exp(log_prices[t - 1]);
        const double price_hat = spec.d == 0 ? std::exp(what) : prev_price * std::exp(what);
        out.price_hat.push_back(price_hat);
        out.delta_hat.push_back(price_hat - prev_price);
    }
    return out;
}

stats::LjungBoxResult residual_diagnostics(const ArimaFit& fit, const std::vector<int>& lags) {
    return stats::ljung_box(fit.residuals, lags);
}

}
