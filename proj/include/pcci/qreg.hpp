#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "pcci/basis.hpp"
#include "pcci/matrix.hpp"

namespace pcci {

// Check (pinball) loss u * (tau - 1{u < 0}); convex with the tau-quantile as
// population minimizer of its expectation.
double pinball_loss(double u, double tau);

struct QuantileFit {
    double tau = 0.5;
    std::vector<double> beta;
    double lambda = 0.0;
    double objective = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

// L1 penalty levels chosen by simulating the pivotal sup statistic of the
// penalized quantile-regression tuning rule: lambda_base is the empirical
// (1 - 1/n)-quantile over n_sim draws of
//   sup_tau || Gamma^{-1} (1/n) sum_i (tau - 1{U_i <= tau}) W_i ||_inf / sqrt(tau (1 - tau))
// with U_i i.i.d. uniform and Gamma_kk = (1/n) sum_i (W_i)_k^2.
struct PenaltySchedule {
    double c = 1.1;
    double lambda_base = 0.0;
    std::size_t n_sim = 0;
    std::uint64_t seed = 0;

    // c * lambda_base * sqrt(tau (1 - tau)), evaluated so that
    // lambda_for(tau) == lambda_for(1 - tau) holds exactly in floating point.
    double lambda_for(double tau) const;
};

PenaltySchedule select_penalty(const Matrix& W, const std::vector<double>& taus, double c,
                               std::size_t n_sim, std::uint64_t seed);

struct FitOptions {
    // Column excluded from the L1 penalty; `no_intercept` penalizes everything.
    static constexpr std::size_t no_intercept = std::numeric_limits<std::size_t>::max();
    std::size_t intercept_col = 0;
    std::size_t max_outer = 10000;
    double rel_tol = 1e-10;
};

// Raised when the iteration budget runs out; carries the best iterate found.
class convergence_error : public std::runtime_error {
  public:
    convergence_error(const std::string& msg, QuantileFit best)
        : std::runtime_error(msg), best_(std::move(best)) {}
    const QuantileFit& best() const { return best_; }

  private:
    QuantileFit best_;
};

// Minimizes sum_i L_tau(x_i - W_i beta) + lambda * ||beta_penalized||_1 by
// majorize-minimize on a smoothed check function (decreasing smoothing, final
// pass epsilon = 1e-8) with coordinate-descent inner solves, followed by a
// proximal-subgradient polish on the exact objective.
QuantileFit fit_penalized_quantile(const Matrix& W, const std::vector<double>& x, double tau,
                                   double lambda, const FitOptions& options = {});

// Exact penalized objective at beta.
double penalized_objective(const Matrix& W, const std::vector<double>& x,
                           const std::vector<double>& beta, double tau, double lambda,
                           std::size_t intercept_col = 0);

double predict_quantile(const QuantileFit& fit, const BasisSpec& spec, std::span<const double> z);

}  // namespace pcci
