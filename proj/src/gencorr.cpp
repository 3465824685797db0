#include "pcci/gencorr.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "pcci/errors.hpp"
#include "pcci/parallel.hpp"
#include "pcci/rng.hpp"
#include "pcci/special.hpp"

namespace pcci {

double PhiCoordinate::sigma(double u) const {
    if (u <= lo || u >= hi) return 0.0;
    if (u < lo + delta) return plateau * (u - lo) / delta;
    if (u > hi - delta) return plateau * (hi - u) / delta;
    return plateau;
}

double PhiCoordinate::phi(double u) const { return scale * (u - center) * sigma(u); }

namespace {

// Polynomial in u with small degree; enough algebra for the exact piecewise
// integrals of the phi family (integrands have degree <= 4).
struct Poly {
    std::vector<double> c;  // c[k] * u^k

    double eval(double u) const {
        double v = 0.0;
        for (std::size_t k = c.size(); k-- > 0;) v = v * u + c[k];
        return v;
    }

    static Poly mul(const Poly& a, const Poly& b) {
        Poly r;
        r.c.assign(a.c.size() + b.c.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.c.size(); ++i)
            for (std::size_t j = 0; j < b.c.size(); ++j) r.c[i + j] += a.c[i] * b.c[j];
        return r;
    }

    // Taylor shift: coefficients of P(center + t) via repeated synthetic
    // division. Ramp pieces have coefficients of magnitude 1/delta^2 and
    // larger; integrating their antiderivative directly at global coordinates
    // cancels catastrophically, so all integrals run in the local frame.
    Poly shifted(double center) const {
        Poly q = *this;
        const std::size_t n = q.c.size();
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = n - 1; k > j; --k) q.c[k - 1] += q.c[k] * center;
        return q;
    }

    double integral(double a, double b) const {
        const double mid = 0.5 * (a + b);
        const double h = 0.5 * (b - a);
        const Poly local = shifted(mid);
        // odd powers cancel over the symmetric interval [-h, h]
        double total = 0.0;
        double h_pow = h;  // h^{k+1}
        for (std::size_t k = 0; k < local.c.size(); ++k) {
            if (k % 2 == 0) total += 2.0 * local.c[k] * h_pow / static_cast<double>(k + 1);
            h_pow *= h;
        }
        return total;
    }
};

struct Piece {
    double a, b;  // interval
    Poly poly;
};

// sigma as polynomial pieces over [lo, hi].
std::vector<Piece> sigma_pieces(const PhiCoordinate& k) {
    const double r = k.plateau / k.delta;
    return {
        {k.lo, k.lo + k.delta, {{-r * k.lo, r}}},
        {k.lo + k.delta, k.hi - k.delta, {{k.plateau}}},
        {k.hi - k.delta, k.hi, {{r * k.hi, -r}}},
    };
}

// phi = scale * (u - center) * sigma as polynomial pieces.
std::vector<Piece> phi_pieces(const PhiCoordinate& k) {
    std::vector<Piece> out = sigma_pieces(k);
    const Poly linear{{-k.scale * k.center, k.scale}};
    for (auto& piece : out) piece.poly = Poly::mul(piece.poly, linear);
    return out;
}

double integrate_product(const std::vector<Piece>& f, const std::vector<Piece>& g) {
    double total = 0.0;
    for (const auto& pf : f) {
        for (const auto& pg : g) {
            const double a = std::max(pf.a, pg.a);
            const double b = std::min(pf.b, pg.b);
            if (b > a) total += Poly::mul(pf.poly, pg.poly).integral(a, b);
        }
    }
    return total;
}

}  // namespace

PhiFamily build_trimmed_spearman(std::size_t q, double tau_min, double tau_max,
                                 double delta_fraction) {
    if (q < 1) throw domain_error("build_trimmed_spearman: q must be >= 1");
    if (!(0.0 < tau_min && tau_min < tau_max && tau_max < 1.0))
        throw domain_error("build_trimmed_spearman: need 0 < tau_min < tau_max < 1");
    if (!(delta_fraction > 0.0 && delta_fraction < 0.5))
        throw domain_error("build_trimmed_spearman: delta_fraction must be in (0, 0.5)");

    PhiFamily family;
    family.q = q;
    family.tau_min = tau_min;
    family.tau_max = tau_max;
    family.delta_fraction = delta_fraction;
    family.coords.resize(q);

    const double width = (tau_max - tau_min) / static_cast<double>(q);
    for (std::size_t k = 0; k < q; ++k) {
        PhiCoordinate& coord = family.coords[k];
        coord.lo = tau_min + static_cast<double>(k) * width;
        coord.hi = k + 1 == q ? tau_max : tau_min + static_cast<double>(k + 1) * width;
        coord.delta = delta_fraction * (coord.hi - coord.lo);
        if (!(coord.delta > 0.0 && coord.delta < 0.5 * (coord.hi - coord.lo)))
            throw domain_error("build_trimmed_spearman: invalid ramp width");
        coord.plateau = 1.0 / (coord.hi - coord.lo - coord.delta);

        // center: integral of u sigma(u); scale: (integral of (u-m)^2 sigma^2)^{-1/2}
        coord.center = 0.0;
        coord.scale = 1.0;
        const std::vector<Piece> sigma = sigma_pieces(coord);
        const Poly u_poly{{0.0, 1.0}};
        double m = 0.0;
        for (const auto& piece : sigma) m += Poly::mul(piece.poly, u_poly).integral(piece.a, piece.b);
        coord.center = m;

        double v = 0.0;
        const Poly centered{{-m, 1.0}};
        for (const auto& piece : sigma) {
            const Poly integrand =
                Poly::mul(Poly::mul(centered, centered), Poly::mul(piece.poly, piece.poly));
            v += integrand.integral(piece.a, piece.b);
        }
        if (v <= 0.0) throw degeneracy_error("build_trimmed_spearman: degenerate coordinate");
        coord.scale = 1.0 / std::sqrt(v);
    }
    return family;
}

double eval_phi(const PhiFamily& family, std::size_t k, double u) {
    if (k < 1 || k > family.q) throw domain_error("eval_phi: coordinate index out of range");
    return family.coords[k - 1].phi(u);
}

Matrix sigma_matrix(const PhiFamily& family) {
    const std::size_t q = family.q;
    Matrix sigma(q, q);
    std::vector<std::vector<Piece>> pieces(q);
    for (std::size_t k = 0; k < q; ++k) pieces[k] = phi_pieces(family.coords[k]);
    for (std::size_t k = 0; k < q; ++k) {
        for (std::size_t s = k; s < q; ++s) {
            const double v = integrate_product(pieces[k], pieces[s]);
            sigma(k, s) = v;
            sigma(s, k) = v;
        }
    }
    return sigma;
}

namespace {

void phi_vector(const PhiFamily& family, double u, double* out) {
    for (std::size_t k = 0; k < family.q; ++k) out[k] = family.coords[k].phi(u);
}

}  // namespace

Matrix rho_hat_reference(const std::vector<double>& u1, const std::vector<double>& u2,
                         const PhiFamily& family) {
    if (u1.size() != u2.size()) throw shape_error("rho_hat: residual vectors differ in length");
    if (u1.empty()) throw empty_data_error("rho_hat: empty residual vectors");
    const std::size_t q = family.q;
    Matrix rho(q, q);
    std::vector<double> a(q), b(q);
    for (std::size_t i = 0; i < u1.size(); ++i) {
        phi_vector(family, u1[i], a.data());
        phi_vector(family, u2[i], b.data());
        for (std::size_t k = 0; k < q; ++k)
            for (std::size_t s = 0; s < q; ++s) rho(k, s) += a[k] * b[s];
    }
    const double inv_n = 1.0 / static_cast<double>(u1.size());
    for (double& v : rho.data) v *= inv_n;
    return rho;
}

Matrix rho_hat(const std::vector<double>& u1, const std::vector<double>& u2,
               const PhiFamily& family) {
    if (u1.size() != u2.size()) throw shape_error("rho_hat: residual vectors differ in length");
    if (u1.empty()) throw empty_data_error("rho_hat: empty residual vectors");
    const std::size_t n = u1.size();
    const std::size_t q = family.q;

    constexpr std::size_t block = 4096;
    const std::size_t blocks = (n + block - 1) / block;
    std::vector<Matrix> partial(blocks);
    parallel_for(blocks, [&](std::size_t bi) {
        Matrix acc(q, q);
        std::vector<double> a(q), b(q);
        const std::size_t end = std::min(n, (bi + 1) * block);
        for (std::size_t i = bi * block; i < end; ++i) {
            phi_vector(family, u1[i], a.data());
            phi_vector(family, u2[i], b.data());
            for (std::size_t k = 0; k < q; ++k)
                for (std::size_t s = 0; s < q; ++s) acc(k, s) += a[k] * b[s];
        }
        partial[bi] = std::move(acc);
    });

    Matrix rho(q, q);
    for (const Matrix& acc : partial)
        for (std::size_t e = 0; e < rho.data.size(); ++e) rho.data[e] += acc.data[e];
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& v : rho.data) v *= inv_n;
    return rho;
}

TestResult chi_square_statistic(const Matrix& rho, const Matrix& sigma, std::size_t n,
                                double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw domain_error("chi_square_statistic: alpha must be in (0, 1)");
    const std::size_t q = rho.rows;
    if (rho.cols != q || sigma.rows != q || sigma.cols != q)
        throw shape_error("chi_square_statistic: rho and sigma must be square of equal size");

    Eigen::MatrixXd S(q, q), R(q, q);
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < q; ++j) {
            S(i, j) = sigma(i, j);
            R(i, j) = rho(i, j);
        }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
    if (eig.info() != Eigen::Success)
        throw degeneracy_error("chi_square_statistic: eigendecomposition failed");
    const Eigen::VectorXd ev = eig.eigenvalues();
    if (ev.minCoeff() < 1e-12)
        throw degeneracy_error(
            "chi_square_statistic: sigma is numerically singular; the phi coordinates are "
            "not linearly independent");
    const Eigen::MatrixXd root_inv =
        eig.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
        eig.eigenvectors().transpose();
    const Eigen::MatrixXd whitened = root_inv * R * root_inv;

    TestResult result;
    result.method = "pc";
    result.q = q;
    result.alpha = alpha;
    result.df = q * q;
    result.statistic = whitened.squaredNorm();
    result.n_t_n = static_cast<double>(n) * result.statistic;
    result.p_value = chi2_sf(result.n_t_n, static_cast<double>(result.df));
    result.reject = result.n_t_n > chi2_quantile(1.0 - alpha, static_cast<double>(result.df));
    result.rho = rho;
    result.sigma = sigma;
    return result;
}

nlohmann::json test_result_to_json(const TestResult& r) {
    nlohmann::json j;
    j["method"] = r.method;
    j["statistic"] = r.statistic;
    j["n_t_n"] = r.n_t_n;
    j["df"] = r.df;
    j["p_value"] = r.p_value;
    j["reject"] = r.reject;
    j["alpha"] = r.alpha;
    j["q"] = r.q;
    j["seed"] = r.seed;
    j["rho"] = r.rho.data;    // row-major
    j["sigma"] = r.sigma.data;
    if (!r.config.is_null()) j["config"] = r.config;
    return j;
}

namespace {

BasisSpec default_basis(std::size_t d) {
    return BasisSpec::additive_uniform(BasisSpec::bspline(5), d);
}

}  // namespace

PcFit pc_fit(const Dataset& data, const PcConfig& config) {
    Dataset working = data.transformed ? data : to_pseudo_obs(data);
    working.validate();

    const std::size_t n = working.n;
    const std::size_t d = working.d;
    const std::size_t m = config.m > 0 ? config.m : default_grid_size(n);
    const QuantileGrid grid = equidistant_grid(config.tau_min, config.tau_max, m);
    const BasisSpec basis_x = config.basis_x ? *config.basis_x : default_basis(d);
    const BasisSpec basis_y = config.basis_y ? *config.basis_y : default_basis(d);

    auto schedule_for = [&](const BasisSpec& basis, std::uint64_t stream) {
        std::optional<PenaltySchedule> penalty;
        if (config.penalized) {
            Matrix W;
            W.rows = n;
            W.cols = basis.dimension();
            W.data = design_matrix(basis, working.z, n, d);
            penalty = select_penalty(W, grid.taus, config.penalty_c, config.penalty_sims,
                                     derive_seed(config.seed, stream));
        }
        return penalty;
    };

    PcFit fit;
    fit.n = n;
    try {
        const auto penalty_x = schedule_for(basis_x, 1);
        fit.model_x = fit_conditional_cdf(working.x, working.z, n, d, basis_x, grid, penalty_x);
    } catch (const convergence_error& e) {
        throw convergence_error(std::string("pc_test[fit-cdf-x]: ") + e.what(), e.best());
    } catch (const degeneracy_error& e) {
        throw degeneracy_error(std::string("pc_test[fit-cdf-x]: ") + e.what());
    }
    try {
        const auto penalty_y = schedule_for(basis_y, 2);
        fit.model_y = fit_conditional_cdf(working.y, working.z, n, d, basis_y, grid, penalty_y);
    } catch (const convergence_error& e) {
        throw convergence_error(std::string("pc_test[fit-cdf-y]: ") + e.what(), e.best());
    } catch (const degeneracy_error& e) {
        throw degeneracy_error(std::string("pc_test[fit-cdf-y]: ") + e.what());
    }

    auto residuals = pit_residuals(fit.model_x, fit.model_y, working);
    fit.u1 = std::move(residuals.first);
    fit.u2 = std::move(residuals.second);
    return fit;
}

TestResult pc_statistic(const PcFit& fit, const PcConfig& config, std::size_t q) {
    const PhiFamily family =
        build_trimmed_spearman(q, config.tau_min, config.tau_max, config.delta_fraction);
    const Matrix rho = rho_hat(fit.u1, fit.u2, family);
    const Matrix sigma = sigma_matrix(family);
    TestResult result;
    try {
        result = chi_square_statistic(rho, sigma, fit.n, config.alpha);
    } catch (const degeneracy_error& e) {
        throw degeneracy_error(std::string("pc_test[statistic]: ") + e.what());
    }
    result.seed = config.seed;
    return result;
}

TestResult pc_test(const Dataset& data, const PcConfig& config) {
    const PcFit fit = pc_fit(data, config);
    return pc_statistic(fit, config, config.q);
}

std::vector<TestResult> pc_test_multi(const Dataset& data, const PcConfig& config,
                                      const std::vector<std::size_t>& qs) {
    const PcFit fit = pc_fit(data, config);
    std::vector<TestResult> results;
    results.reserve(qs.size());
    for (std::size_t q : qs) results.push_back(pc_statistic(fit, config, q));
    return results;
}

}  // namespace pcci
