#include "pcci/cdf.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "pcci/errors.hpp"
#include "pcci/parallel.hpp"

namespace pcci {

QuantileGrid equidistant_grid(double tau_min, double tau_max, std::size_t m) {
    if (!(0.0 < tau_min && tau_min < tau_max && tau_max < 1.0))
        throw domain_error("equidistant_grid: need 0 < tau_min < tau_max < 1");
    if (m < 2) throw domain_error("equidistant_grid: need m >= 2");

    QuantileGrid grid;
    grid.tau_min = tau_min;
    grid.tau_max = tau_max;
    grid.m = m;
    grid.taus.resize(m);
    const double step = (tau_max - tau_min) / static_cast<double>(m - 1);
    for (std::size_t k = 0; k < m; ++k)
        grid.taus[k] = tau_min + static_cast<double>(k) * step;
    grid.taus.back() = tau_max;
    grid.kappa = step;
    return grid;
}

std::size_t default_grid_size(std::size_t n) {
    return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
}

std::vector<double> rearrange(std::vector<double> v) {
    constexpr double sep = 1e-9;
    std::sort(v.begin(), v.end());
    for (double& q : v) q = std::clamp(q, 0.0, 1.0);
    // push up from the lower endpoint, then down from the upper one
    double floor = sep;
    for (double& q : v) {
        if (q < floor) q = floor;
        floor = q + sep;
    }
    double ceiling = 1.0 - sep;
    for (std::size_t k = v.size(); k-- > 0;) {
        if (v[k] > ceiling) v[k] = ceiling;
        ceiling = v[k] - sep;
    }
    return v;
}

double interpolate_cdf(const std::vector<double>& q, const QuantileGrid& grid, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw domain_error("interpolate_cdf: t must be in [0, 1]");
    if (q.size() != grid.m) throw shape_error("interpolate_cdf: knot count mismatch");

    // knots (q_0, tau_0) = (0, 0), (q_k, tau_k), (q_{m+1}, tau_{m+1}) = (1, 1)
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;

    // first index with q[idx] >= t; segment is (lo, hi]
    const std::size_t idx = static_cast<std::size_t>(
        std::lower_bound(q.begin(), q.end(), t) - q.begin());
    const double q_lo = idx == 0 ? 0.0 : q[idx - 1];
    const double q_hi = idx == grid.m ? 1.0 : q[idx];
    const double tau_lo = idx == 0 ? 0.0 : grid.taus[idx - 1];
    const double tau_hi = idx == grid.m ? 1.0 : grid.taus[idx];
    if (t == q_hi || q_hi <= q_lo) return tau_hi;  // hit a knot exactly
    return tau_lo + (tau_hi - tau_lo) * (t - q_lo) / (q_hi - q_lo);
}

ConditionalCdfModel fit_conditional_cdf(const std::vector<double>& response,
                                        const std::vector<double>& covariates, std::size_t n,
                                        std::size_t d, const BasisSpec& basis,
                                        const QuantileGrid& grid,
                                        const std::optional<PenaltySchedule>& penalty) {
    if (response.size() != n) throw shape_error("fit_conditional_cdf: response length mismatch");
    if (basis.input_dimension() != d)
        throw shape_error("fit_conditional_cdf: basis expects d = " +
                          std::to_string(basis.input_dimension()));
    for (double v : response)
        if (!(v >= 0.0 && v <= 1.0))
            throw domain_error("fit_conditional_cdf: response values must lie in [0, 1]");

    ConditionalCdfModel model;
    model.grid = grid;
    model.basis = basis;
    model.fits.resize(grid.m);

    Matrix W;
    W.rows = n;
    W.cols = basis.dimension();
    W.data = design_matrix(basis, covariates, n, d);

    FitOptions options;
    options.intercept_col = basis.includes_intercept ? 0 : FitOptions::no_intercept;

    // independent per-level fits; ordering of completion does not matter
    parallel_for(grid.m, [&](std::size_t k) {
        const double tau = grid.taus[k];
        const double lambda = penalty ? penalty->lambda_for(tau) : 0.0;
        try {
            model.fits[k] = fit_penalized_quantile(W, response, tau, lambda, options);
        } catch (const convergence_error& e) {
            throw convergence_error("tau=" + std::to_string(tau) + ": " + e.what(), e.best());
        }
    });
    return model;
}

std::vector<double> predicted_quantiles(const ConditionalCdfModel& model,
                                        std::span<const double> z) {
    const std::vector<double> h = expand(model.basis, z);
    std::vector<double> q(model.grid.m);
    for (std::size_t k = 0; k < model.grid.m; ++k) {
        const std::vector<double>& beta = model.fits[k].beta;
        double v = 0.0;
        for (std::size_t j = 0; j < h.size(); ++j) v += h[j] * beta[j];
        q[k] = v;
    }
    return rearrange(std::move(q));
}

double eval_conditional_cdf(const ConditionalCdfModel& model, std::span<const double> z,
                            double t) {
    return interpolate_cdf(predicted_quantiles(model, z), model.grid, t);
}

std::pair<std::vector<double>, std::vector<double>> pit_residuals(
    const ConditionalCdfModel& model_x, const ConditionalCdfModel& model_y,
    const Dataset& data) {
    if (model_x.input_dimension() != data.d || model_y.input_dimension() != data.d)
        throw shape_error("pit_residuals: model dimension does not match dataset");

    std::vector<double> u1(data.n), u2(data.n);
    parallel_for(data.n, [&](std::size_t i) {
        const std::span<const double> z(data.z_row(i), data.d);
        u1[i] = eval_conditional_cdf(model_x, z, data.x[i]);
        u2[i] = eval_conditional_cdf(model_y, z, data.y[i]);
    });
    return {std::move(u1), std::move(u2)};
}

nlohmann::json cdf_model_to_json(const ConditionalCdfModel& model) {
    nlohmann::json j;
    j["grid"] = {{"tau_min", model.grid.tau_min},
                 {"tau_max", model.grid.tau_max},
                 {"m", model.grid.m}};
    j["basis"] = basis_to_json(model.basis);
    nlohmann::json coef = nlohmann::json::array();
    nlohmann::json lambdas = nlohmann::json::array();
    for (const auto& fit : model.fits) {
        coef.push_back(fit.beta);
        lambdas.push_back(fit.lambda);
    }
    j["coefficients"] = coef;  // m x p, one row per grid level
    j["lambdas"] = lambdas;
    return j;
}

ConditionalCdfModel cdf_model_from_json(const nlohmann::json& j) {
    ConditionalCdfModel model;
    const auto& g = j.at("grid");
    model.grid = equidistant_grid(g.at("tau_min").get<double>(), g.at("tau_max").get<double>(),
                                  g.at("m").get<std::size_t>());
    model.basis = basis_from_json(j.at("basis"));
    const auto& coef = j.at("coefficients");
    const auto& lambdas = j.at("lambdas");
    if (coef.size() != model.grid.m) throw shape_error("cdf model: coefficient rows != m");
    model.fits.resize(model.grid.m);
    for (std::size_t k = 0; k < model.grid.m; ++k) {
        model.fits[k].tau = model.grid.taus[k];
        model.fits[k].beta = coef.at(k).get<std::vector<double>>();
        model.fits[k].lambda = lambdas.at(k).get<double>();
        model.fits[k].converged = true;
        if (model.fits[k].beta.size() != model.basis.dimension())
            throw shape_error("cdf model: coefficient length != basis dimension");
    }
    return model;
}

}  // namespace pcci
