#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pcci/basis.hpp"
#include "pcci/dataset.hpp"
#include "pcci/qreg.hpp"

namespace pcci {

// Equidistant quantile levels tau_1 = tau_min < ... < tau_m = tau_max, with
// the implicit boundary levels tau_0 = 0 and tau_{m+1} = 1.
struct QuantileGrid {
    double tau_min = 0.01;
    double tau_max = 0.99;
    std::size_t m = 2;
    std::vector<double> taus;
    double kappa = 0.0;  // grid coarseness, the largest consecutive gap
};

QuantileGrid equidistant_grid(double tau_min, double tau_max, std::size_t m);

// Rule-of-thumb grid size: the smallest integer >= sqrt(n).
std::size_t default_grid_size(std::size_t n);

// Conditional-CDF estimator: one penalized quantile fit per grid level,
// evaluated by monotone rearrangement of the predicted quantiles and linear
// interpolation of (quantile, level) pairs.
struct ConditionalCdfModel {
    QuantileGrid grid;
    BasisSpec basis;
    std::vector<QuantileFit> fits;

    std::size_t input_dimension() const { return basis.input_dimension(); }
};

// Sorts ascending, clamps into [0, 1] and enforces a minimal gap of 1e-9
// between consecutive values (and against both interval endpoints) so the
// interpolation knots are strictly increasing.
std::vector<double> rearrange(std::vector<double> predictions);

// Piecewise-linear CDF through (0, 0), (q_k, tau_k)_{k=1..m}, (1, 1) given
// already-rearranged quantile knots; this is the evaluation core shared by
// the fitted model and by tests that supply analytic quantile curves.
double interpolate_cdf(const std::vector<double>& quantiles, const QuantileGrid& grid, double t);

ConditionalCdfModel fit_conditional_cdf(const std::vector<double>& response,
                                        const std::vector<double>& covariates, std::size_t n,
                                        std::size_t d, const BasisSpec& basis,
                                        const QuantileGrid& grid,
                                        const std::optional<PenaltySchedule>& penalty);

// Rearranged, clamped quantile predictions at z for all grid levels.
std::vector<double> predicted_quantiles(const ConditionalCdfModel& model,
                                        std::span<const double> z);

double eval_conditional_cdf(const ConditionalCdfModel& model, std::span<const double> z,
                            double t);

// Probability-integral-transform residuals U1_i = F_x(x_i | z_i),
// U2_i = F_y(y_i | z_i) for every observation.
std::pair<std::vector<double>, std::vector<double>> pit_residuals(
    const ConditionalCdfModel& model_x, const ConditionalCdfModel& model_y, const Dataset& data);

nlohmann::json cdf_model_to_json(const ConditionalCdfModel& model);
ConditionalCdfModel cdf_model_from_json(const nlohmann::json& j);

}  // namespace pcci
