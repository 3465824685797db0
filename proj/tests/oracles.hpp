// Test-only reference computations, independent of the library's own
// implementation paths: an exact LP enumeration oracle for penalized quantile
// regression, adaptive Simpson quadrature, a dense-grid KS oracle and
// analytic conditional distributions.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "pcci/matrix.hpp"
#include "pcci/special.hpp"

namespace oracles {

inline double pinball(double u, double tau) { return u * (tau - (u < 0.0 ? 1.0 : 0.0)); }

inline double penalized_objective(const pcci::Matrix& W, const std::vector<double>& x,
                                  const Eigen::VectorXd& beta, double tau, double lambda,
                                  std::size_t intercept_col) {
    double obj = 0.0;
    for (std::size_t i = 0; i < W.rows; ++i) {
        double u = x[i];
        for (std::size_t j = 0; j < W.cols; ++j) u -= W(i, j) * beta(static_cast<long>(j));
        obj += pinball(u, tau);
    }
    for (std::size_t j = 0; j < W.cols; ++j)
        if (j != intercept_col) obj += lambda * std::fabs(beta(static_cast<long>(j)));
    return obj;
}

// Exact minimum of sum_i L_tau(x_i - W_i beta) + lambda ||beta_penalized||_1
// by enumeration: some optimum is determined by a set of interpolated
// observations plus zeroed penalized coordinates whose defining rows span the
// coefficient space. All candidate subsets with |S| + |Z| <= p are solved in
// the least-squares sense and the exact objective is evaluated at each
// candidate, so the returned value can never undercut the true minimum.
inline double lp_quantile_minimum(const pcci::Matrix& W, const std::vector<double>& x,
                                  double tau, double lambda, std::size_t intercept_col = 0) {
    const std::size_t n = W.rows;
    const std::size_t p = W.cols;

    std::vector<std::size_t> penalized;
    for (std::size_t j = 0; j < p; ++j)
        if (j != intercept_col) penalized.push_back(j);

    double best = std::numeric_limits<double>::infinity();
    auto consider = [&](const std::vector<std::size_t>& rows,
                        const std::vector<std::size_t>& zeros) {
        const std::size_t k = rows.size() + zeros.size();
        if (k == 0) {
            best = std::min(best, penalized_objective(W, x, Eigen::VectorXd::Zero(p), tau,
                                                      lambda, intercept_col));
            return;
        }
        Eigen::MatrixXd A(k, p);
        Eigen::VectorXd b(k);
        std::size_t r = 0;
        for (std::size_t i : rows) {
            for (std::size_t j = 0; j < p; ++j) A(r, j) = W(i, j);
            b(r) = x[i];
            ++r;
        }
        for (std::size_t j : zeros) {
            A.row(r).setZero();
            A(r, static_cast<long>(j)) = 1.0;
            b(r) = 0.0;
            ++r;
        }
        const Eigen::VectorXd beta =
            A.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
        best = std::min(best, penalized_objective(W, x, beta, tau, lambda, intercept_col));
    };

    // enumerate subsets of rows and of penalized coordinates by bitmask
    std::vector<std::vector<std::size_t>> row_subsets, zero_subsets;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (std::size_t{1} << i)) rows.push_back(i);
        if (rows.size() <= p) row_subsets.push_back(std::move(rows));
    }
    for (std::size_t mask = 0; mask < (std::size_t{1} << penalized.size()); ++mask) {
        std::vector<std::size_t> zeros;
        for (std::size_t i = 0; i < penalized.size(); ++i)
            if (mask & (std::size_t{1} << i)) zeros.push_back(penalized[i]);
        zero_subsets.push_back(std::move(zeros));
    }
    for (const auto& rows : row_subsets)
        for (const auto& zeros : zero_subsets)
            if (rows.size() + zeros.size() <= p) consider(rows, zeros);
    return best;
}

// Adaptive Simpson quadrature.
inline double simpson_segment(const std::function<double(double)>& f, double a, double b,
                              double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson_segment(f, a, m, fa, flm, fm);
    const double right = simpson_segment(f, m, b, fm, frm, fb);
    if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12) {
    if (b <= a) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = simpson_segment(f, a, b, fa, fm, fb);
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

// Integrates across the given breakpoints so kinks never straddle a panel.
inline double integrate_piecewise(const std::function<double(double)>& f,
                                  std::vector<double> breaks, double tol = 1e-12) {
    std::sort(breaks.begin(), breaks.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
        total += integrate(f, breaks[i], breaks[i + 1], tol);
    return total;
}

// Dense-grid sup oracle for the KS distance of a sample to Uniform[0, 1].
inline double ks_uniform_dense(std::vector<double> sample, std::size_t grid_points = 200001) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double sup = 0.0;
    for (std::size_t g = 0; g < grid_points; ++g) {
        const double t = static_cast<double>(g) / static_cast<double>(grid_points - 1);
        const double ecdf =
            static_cast<double>(std::upper_bound(sample.begin(), sample.end(), t) -
                                sample.begin()) /
            n;
        sup = std::max(sup, std::fabs(ecdf - t));
    }
    return sup;
}

// Truncated-normal location-scale family on [0, 1]: X | z with pre-truncation
// mean mu(z) and scale s(z), conditioned to the unit interval.
struct TruncatedNormal {
    double mu;
    double s;

    double alpha() const { return (0.0 - mu) / s; }
    double beta() const { return (1.0 - mu) / s; }
    double mass() const { return pcci::normal_cdf(beta()) - pcci::normal_cdf(alpha()); }

    double cdf(double t) const {
        if (t <= 0.0) return 0.0;
        if (t >= 1.0) return 1.0;
        return (pcci::normal_cdf((t - mu) / s) - pcci::normal_cdf(alpha())) / mass();
    }

    double quantile(double tau) const {
        const double lo = pcci::normal_cdf(alpha());
        return mu + s * pcci::normal_quantile(lo + tau * mass());
    }
};

}  // namespace oracles
