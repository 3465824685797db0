#include "pcci/baselines.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "pcci/errors.hpp"
#include "pcci/special.hpp"

namespace pcci {

namespace {

Eigen::MatrixXd design_eigen(const BasisSpec& basis, const Dataset& data) {
    const std::size_t p = basis.dimension();
    Eigen::MatrixXd W(data.n, p);
    std::vector<double> row;
    for (std::size_t i = 0; i < data.n; ++i) {
        expand(basis, std::span<const double>(data.z_row(i), data.d), row);
        for (std::size_t j = 0; j < p; ++j) W(i, j) = row[j];
    }
    return W;
}

// Least-squares residuals y - W beta_hat; rank-deficient designs are handled
// by the pivoted QR (the fitted values are the projection either way).
Eigen::VectorXd ls_residuals(const Eigen::MatrixXd& W, const Eigen::VectorXd& y, double ridge) {
    if (ridge > 0.0) {
        const Eigen::MatrixXd G =
            W.transpose() * W + ridge * Eigen::MatrixXd::Identity(W.cols(), W.cols());
        const Eigen::VectorXd beta = G.ldlt().solve(W.transpose() * y);
        return y - W * beta;
    }
    const Eigen::VectorXd beta = W.colPivHouseholderQr().solve(y);
    return y - W * beta;
}

// Fills the baseline fields so that the shared decision rule
// reject <=> n_t_n > chi2-quantile(1 - alpha, 1) matches the two-sided
// normal test: the squared statistic is chi-squared with 1 df under the null.
TestResult normal_test_result(const std::string& method, double statistic, double alpha) {
    TestResult result;
    result.method = method;
    result.q = 1;
    result.df = 1;
    result.alpha = alpha;
    result.statistic = statistic;
    result.n_t_n = statistic * statistic;
    result.p_value = chi2_sf(result.n_t_n, 1.0);
    result.reject = result.n_t_n > chi2_quantile(1.0 - alpha, 1.0);
    result.sigma = Matrix(1, 1, 1.0);
    return result;
}

}  // namespace

TestResult gcm_test(const Dataset& data, const MeanRegressionSpec& spec_x,
                    const MeanRegressionSpec& spec_y, double alpha) {
    data.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw domain_error("gcm_test: alpha must be in (0, 1)");
    const std::size_t n = data.n;
    if (spec_x.basis.input_dimension() != data.d || spec_y.basis.input_dimension() != data.d)
        throw shape_error("gcm_test: basis dimension does not match dataset");
    if (n <= std::max(spec_x.basis.dimension(), spec_y.basis.dimension()))
        throw domain_error("gcm_test: need n > p");

    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(data.x.data(), n);
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(data.y.data(), n);
    const Eigen::VectorXd r1 = ls_residuals(design_eigen(spec_x.basis, data), x, spec_x.ridge);
    const Eigen::VectorXd r2 = ls_residuals(design_eigen(spec_y.basis, data), y, spec_y.ridge);

    const Eigen::VectorXd prod = r1.cwiseProduct(r2);
    const double mean = prod.mean();
    const double mean_sq = prod.squaredNorm() / static_cast<double>(n);
    const double var = mean_sq - mean * mean;
    // equal products leave var at rounding level relative to mean_sq
    if (!(var > 0.0) || var <= 1e-12 * mean_sq)
        throw degeneracy_error("gcm_test: residual products have zero variance");

    const double statistic = std::sqrt(static_cast<double>(n)) * mean / std::sqrt(var);
    TestResult result = normal_test_result("gcm", statistic, alpha);
    result.rho = Matrix(1, 1, mean / std::sqrt(var));
    return result;
}

TestResult npn_test(const Dataset& data, double alpha) {
    data.validate();
    if (!data.transformed)
        throw domain_error("npn_test: requires pseudo-observations (transformed dataset)");
    if (!(alpha > 0.0 && alpha < 1.0)) throw domain_error("npn_test: alpha must be in (0, 1)");
    const std::size_t n = data.n;
    const std::size_t d = data.d;
    if (n <= d + 3) throw domain_error("npn_test: need n > d + 3");

    // normal scores
    Eigen::VectorXd x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x(i) = normal_quantile(data.x[i]);
        y(i) = normal_quantile(data.y[i]);
    }
    Eigen::MatrixXd Z(n, d + 1);
    Z.col(0).setOnes();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) Z(i, j + 1) = normal_quantile(data.z_at(i, j));

    const Eigen::VectorXd rx = ls_residuals(Z, x, 0.0);
    const Eigen::VectorXd ry = ls_residuals(Z, y, 0.0);
    const double sx = rx.norm();
    const double sy = ry.norm();
    if (!(sx > 1e-12 && sy > 1e-12))
        throw degeneracy_error("npn_test: zero residual variance (singular z design)");

    double r = rx.dot(ry) / (sx * sy);
    r = std::clamp(r, -1.0 + 1e-15, 1.0 - 1e-15);
    const double statistic =
        std::sqrt(static_cast<double>(n - d) - 3.0) * std::atanh(r);

    TestResult result = normal_test_result("npn", statistic, alpha);
    result.rho = Matrix(1, 1, r);
    return result;
}

}  // namespace pcci
