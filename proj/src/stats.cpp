#include "pricecast/stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pricecast::stats {

namespace {

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / double(xs.size());
}

struct OlsFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
    double ssr = 0.0;
    Eigen::Index n = 0;
};

OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    OlsFit fit;
    fit.n = y.size();
    fit.beta = x.colPivHouseholderQr().solve(y);
    const Eigen::VectorXd resid = y - x * fit.beta;
    fit.ssr = resid.squaredNorm();
    const double dof = double(fit.n - x.cols());
    if (dof <= 0.0) {
        throw std::invalid_argument("ols: more regressors than observations");
    }
    const double s2 = fit.ssr / dof;
    const Eigen::MatrixXd xtx_inv = (x.transpose() * x).inverse();
    fit.se = (s2 * xtx_inv.diagonal()).array().sqrt();
    return fit;
}

// Design matrix for the ADF regression at lag order k, restricted to
// difference indices [start, end). Row t explains dy[t] with a constant,
// y[t] (the level one step before the difference), and dy[t-1..t-k].
void adf_design(const std::vector<double>& y, const std::vector<double>& dy, int k,
                std::size_t start, Eigen::MatrixXd& x, Eigen::VectorXd& rhs) {
    const std::size_t rows = dy.size() - start;
    x.resize(Eigen::Index(rows), 2 + k);
    rhs.resize(Eigen::Index(rows));
    for (std::size_t t = start; t < dy.size(); ++t) {
        const Eigen::Index r = Eigen::Index(t - start);
        rhs(r) = dy[t];
        x(r, 0) = 1.0;
        x(r, 1) = y[t];
        for (int i = 1; i <= k; ++i) {
            x(r, 1 + i) = dy[t - std::size_t(i)];
        }
    }
}

}

std::vector<double> log_series(const std::vector<double>& series) {
    std::vector<double> out;
    out.reserve(series.size());
    for (double x : series) {
        if (x <= 0.0) {
            throw std::invalid_argument("log_series: non-positive value");
        }
        out.push_back(std::log(x));
    }
    return out;
}

std::vector<double> diff(const std::vector<double>& series, int d) {
    if (d < 0) {
        throw std::invalid_argument("diff: negative order");
    }
    std::vector<double> out = series;
    for (int round = 0; round < d; ++round) {
        if (out.size() < 2) {
            throw std::invalid_argument("diff: series too short");
        }
        std::vector<double> next(out.size() - 1);
        for (std::size_t i = 1; i < out.size(); ++i) {
            next[i - 1] = out[i] - out[i - 1];
        }
        out = std::move(next);
    }
    return out;
}

std::vector<double> acf(const std::vector<double>& series, int max_lag) {
    const std::size_t n = series.size();
    if (max_lag < 0 || std::size_t(max_lag) >= n) {
        throw std::invalid_argument("acf: max_lag out of range");
    }
    const double mu = mean_of(series);
    double denom = 0.0;
    for (double x : series) {
        denom += (x - mu) * (x - mu);
    }
    if (denom <= 0.0) {
        throw std::invalid_argument("acf: constant series");
    }
    std::vector<double> rho(std::size_t(max_lag) + 1, 0.0);
    rho[0] = 1.0;
    for (int k = 1; k <= max_lag; ++k) {
        double num = 0.0;
        for (std::size_t t = std::size_t(k); t < n; ++t) {
            num += (series[t] - mu) * (series[t - std::size_t(k)] - mu);
        }
        rho[std::size_t(k)] = num / denom;
    }
    return rho;
}

std::vector<double> pacf(const std::vector<double>& series, int max_lag) {
    const std::vector<double> rho = acf(series, max_lag);
    std::vector<double> out(std::size_t(max_lag) + 1, 0.0);
    out[0] = 1.0;
    if (max_lag == 0) {
        return out;
    }
    // Durbin-Levinson: phi[k][k] is the lag-k partial autocorrelation.
    std::vector<double> phi_prev(std::size_t(max_lag) + 1, 0.0);
    std::vector<double> phi_cur(std::size_t(max_lag) + 1, 0.0);
    phi_prev[1] = rho[1];
    out[1] = rho[1];
    for (int k = 2; k <= max_lag; ++k) {
        double num = rho[std::size_t(k)];
        double den = 1.0;
        for (int j = 1; j < k; ++j) {
            num -= phi_prev[std::size_t(j)] * rho[std::size_t(k - j)];
            den -= phi_prev[std::size_t(j)] * rho[std::size_t(j)];
        }
        if (den == 0.0) {
            throw std::runtime_error("pacf: degenerate Durbin-Levinson step");
        }
        const double phi_kk = num / den;
        for (int j = 1; j < k; ++j) {
            phi_cur[std::size_t(j)] =
                phi_prev[std::size_t(j)] - phi_kk * phi_prev[std::size_t(k - j)];
        }
        phi_cur[std::size_t(k)] = phi_kk;
        out[std::size_t(k)] = phi_kk;
        std::swap(phi_prev, phi_cur);
    }
    return out;
}

AdfResult adf_test(const std::vector<double>& series) {
    const std::size_t n = series.size();
    if (n < 30) {
        throw std::invalid_argument("adf_test: series too short");
    }
    if (std::equal(series.begin() + 1, series.end(), series.begin())) {
        throw std::invalid_argument("adf_test: constant series");
    }
    const std::vector<double> dy = diff(series, 1);
    const int max_lag = int(std::floor(12.0 * std::pow(double(n) / 100.0, 0.25)));
    // Lag order by AIC on the sample every candidate can cover, so the
    // criteria are comparable.
    const std::size_t common_start = std::size_t(max_lag);
    if (dy.size() <= common_start + std::size_t(max_lag) + 3) {
        throw std::invalid_argument("adf_test: series too short for lag window");
    }
    int best_k = 0;
    double best_aic = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd x;
    Eigen::VectorXd rhs;
    for (int k = 0; k <= max_lag; ++k) {
        adf_design(series, dy, k, common_start, x, rhs);
        const OlsFit fit = ols(x, rhs);
        const double sigma2 = fit.ssr / double(fit.n);
        const double aic = double(fit.n) * std::log(sigma2) + 2.0 * double(x.cols());
        if (aic < best_aic) {
            best_aic = aic;
            best_k = k;
        }
    }
    // Refit the winner on everything it can use.
    adf_design(series, dy, best_k, std::size_t(best_k), x, rhs);
    const OlsFit fit = ols(x, rhs);
    AdfResult result;
    result.statistic = fit.beta(1) / fit.se(1);
    result.lags_used = best_k;
    result.critical_values = {{"1%", -3.43}, {"5%", -2.86}, {"10%", -2.57}};
    result.reject_unit_root = result.statistic < result.critical_values.at("5%");
    return result;
}

LjungBoxResult ljung_box(const std::vector<double>& residuals, const std::vector<int>& lags) {
    const std::size_t n = residuals.size();
    if (lags.empty()) {
        throw std::invalid_argument("ljung_box: no lags requested");
    }
    int max_lag = 0;
    for (int h : lags) {
        if (h < 1) {
            throw std::invalid_argument("ljung_box: lags must be positive");
        }
        max_lag = std::max(max_lag, h);
    }
    if (std::size_t(max_lag) >= n) {
        throw std::invalid_argument("ljung_box: lag exceeds sample size");
    }
    const std::vector<double> rho = acf(residuals, max_lag);
    LjungBoxResult result;
    for (int h : lags) {
        double q = 0.0;
        for (int k = 1; k <= h; ++k) {
            q += rho[std::size_t(k)] * rho[std::size_t(k)] / double(n - std::size_t(k));
        }
        q *= double(n) * double(n + 2);
        LjungBoxEntry entry;
        entry.lag = h;
        entry.q_stat = q;
        entry.chi2_95 = chi2_quantile(0.95, h);
        entry.white_noise_ok = q < entry.chi2_95;
        result.entries.push_back(entry);
    }
    return result;
}

double gamma_p(double a, double x) {
    if (a <= 0.0 || x < 0.0) {
        throw std::invalid_argument("gamma_p: bad arguments");
    }
    if (x == 0.0) {
        return 0.0;
    }
    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        // Series: P(a,x) = x^a e^-x / Gamma(a) * sum x^n / (a)_{n+1}
        double term = 1.0 / a;
        double sum = term;
        for (int n = 1; n < 500; ++n) {
            term *= x / (a + double(n));
            sum += term;
            if (std::fabs(term) < std::fabs(sum) * 1e-16) {
                break;
            }
        }
        return sum * std::exp(-x + a * std::log(x) - lg);
    }
    // Continued fraction for Q(a,x), modified Lentz.
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) {
            break;
        }
    }
    const double q = std::exp(-x + a * std::log(x) - lg) * h;
    return 1.0 - q;
}

double chi2_cdf(double x, int dof) {
    if (dof < 1) {
        throw std::invalid_argument("chi2_cdf: dof must be positive");
    }
    if (x <= 0.0) {
        return 0.0;
    }
    return gamma_p(double(dof) / 2.0, x / 2.0);
}

double chi2_quantile(double prob, int dof) {
    if (!(prob > 0.0 && prob < 1.0)) {
        throw std::invalid_argument("chi2_quantile: prob must be in (0, 1)");
    }
    double lo = 0.0;
    double hi = double(dof) + 20.0 * std::sqrt(2.0 * double(dof)) + 100.0;
    while (chi2_cdf(hi, dof) < prob) {
        hi *= 2.0;
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (chi2_cdf(mid, dof) < prob) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-12 * std::max(1.0, hi)) {
            break;
        }
    }
    return 0.5 * (lo + hi);
}

}
