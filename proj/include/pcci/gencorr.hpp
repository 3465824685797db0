#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcci/basis.hpp"
#include "pcci/cdf.hpp"
#include "pcci/dataset.hpp"
#include "pcci/matrix.hpp"

namespace pcci {

// One trimmed-Spearman coordinate phi(u) = scale * (u - center) * sigma(u),
// where sigma is the trapezoidal bump of unit integral on [lo, hi]:
// linear ramps of width delta at both ends and plateau value
// plateau = 1 / (hi - lo - delta) in between. center and scale are fixed so
// that phi integrates to zero and phi^2 to one.
struct PhiCoordinate {
    double lo = 0.0;
    double hi = 1.0;
    double delta = 0.0;
    double plateau = 0.0;
    double center = 0.0;
    double scale = 0.0;

    double sigma(double u) const;
    double phi(double u) const;
};

struct PhiFamily {
    std::size_t q = 1;
    double tau_min = 0.01;
    double tau_max = 0.99;
    double delta_fraction = 0.01;
    std::vector<PhiCoordinate> coords;
};

// Partitions [tau_min, tau_max] into q equal sub-intervals and builds one
// coordinate per sub-interval with ramp width delta_fraction * interval length.
PhiFamily build_trimmed_spearman(std::size_t q, double tau_min, double tau_max,
                                 double delta_fraction);

// k is 1-based, matching the coordinate numbering phi_1, ..., phi_q.
double eval_phi(const PhiFamily& family, std::size_t k, double u);

// Sigma_{k,s} = integral of phi_k phi_s over [0, 1], by exact piecewise
// polynomial antiderivatives.
Matrix sigma_matrix(const PhiFamily& family);

// (1/n) sum_i phi(u1_i) phi(u2_i)^T. Deterministic under any thread count:
// fixed-size blocks are accumulated independently and combined in order.
Matrix rho_hat(const std::vector<double>& u1, const std::vector<double>& u2,
               const PhiFamily& family);

// Plain serial accumulation, kept as the reference for the parallel kernel.
Matrix rho_hat_reference(const std::vector<double>& u1, const std::vector<double>& u2,
                         const PhiFamily& family);

struct TestResult {
    std::string method;
    double statistic = 0.0;  // T_n for the partial-copula test
    double n_t_n = 0.0;
    std::size_t df = 1;
    double p_value = 1.0;
    bool reject = false;
    double alpha = 0.05;
    std::size_t q = 1;
    std::uint64_t seed = 0;
    Matrix rho;
    Matrix sigma;
    nlohmann::json config;  // full resolved configuration echo
};

nlohmann::json test_result_to_json(const TestResult& result);

// T_n = || Sigma^{-1/2} rho Sigma^{-1/2} ||_F^2 with the inverse square root
// taken by symmetric eigendecomposition; n T_n is referred to a chi-squared
// distribution with q^2 degrees of freedom.
TestResult chi_square_statistic(const Matrix& rho, const Matrix& sigma, std::size_t n,
                                double alpha);

struct PcConfig {
    std::size_t q = 1;
    double alpha = 0.05;
    double tau_min = 0.01;
    double tau_max = 0.99;
    std::size_t m = 0;  // 0: use ceil(sqrt(n))
    double delta_fraction = 0.01;
    std::optional<BasisSpec> basis_x;  // default: additive cubic B-splines, df 5
    std::optional<BasisSpec> basis_y;
    bool penalized = true;
    double penalty_c = 1.1;
    std::size_t penalty_sims = 1000;
    std::uint64_t seed = 0;
};

// Fitted halves of the partial-copula test, reusable across several q.
struct PcFit {
    ConditionalCdfModel model_x;
    ConditionalCdfModel model_y;
    std::vector<double> u1;
    std::vector<double> u2;
    std::size_t n = 0;
};

PcFit pc_fit(const Dataset& data, const PcConfig& config);

TestResult pc_statistic(const PcFit& fit, const PcConfig& config, std::size_t q);

// Full pipeline: pseudo-observations (if not already applied), two conditional
// CDF fits on the full sample, residuals, trimmed-Spearman chi-squared test.
TestResult pc_test(const Dataset& data, const PcConfig& config);

// Several q sharing one pair of fitted conditional CDFs.
std::vector<TestResult> pc_test_multi(const Dataset& data, const PcConfig& config,
                                      const std::vector<std::size_t>& qs);

}  // namespace pcci
