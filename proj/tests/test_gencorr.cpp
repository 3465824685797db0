#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "pcci/dataset.hpp"
#include "pcci/errors.hpp"
#include "pcci/gencorr.hpp"
#include "pcci/parallel.hpp"
#include "pcci/rng.hpp"
#include "pcci/special.hpp"

using namespace pcci;

namespace {

std::vector<double> coordinate_breaks(const PhiCoordinate& c) {
    return {c.lo, c.lo + c.delta, c.hi - c.delta, c.hi};
}

double quad_phi_moment(const PhiCoordinate& c, int power_of_u, bool squared) {
    auto f = [&](double u) {
        const double v = c.phi(u);
        double w = squared ? v * v : v;
        for (int e = 0; e < power_of_u; ++e) w *= u;
        return w;
    };
    return oracles::integrate_piecewise(f, coordinate_breaks(c), 1e-13);
}

}  // namespace

TEST_CASE("trimming function constants for the single-coordinate default") {
    const PhiFamily family = build_trimmed_spearman(1, 0.01, 0.99, 0.01);
    const PhiCoordinate& c = family.coords[0];
    CHECK(c.delta == doctest::Approx(0.0098).epsilon(1e-12));
    CHECK(c.plateau == doctest::Approx(1.0 / (0.98 - 0.0098)).epsilon(1e-12));
    // symmetric interval: centering constant at the midpoint
    CHECK(c.center == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("scale constant matches an adaptive-quadrature oracle") {
    const PhiFamily family = build_trimmed_spearman(1, 0.01, 0.99, 0.01);
    const PhiCoordinate& c = family.coords[0];
    auto integrand = [&](double u) {
        const double s = c.sigma(u);
        return (u - c.center) * (u - c.center) * s * s;
    };
    const double v = oracles::integrate_piecewise(integrand, coordinate_breaks(c), 1e-14);
    CHECK(c.scale == doctest::Approx(1.0 / std::sqrt(v)).epsilon(1e-8));
}

TEST_CASE("phi coordinates are centered and normalized for q = 1..5") {
    for (std::size_t q = 1; q <= 5; ++q) {
        const PhiFamily family = build_trimmed_spearman(q, 0.01, 0.99, 0.01);
        for (const PhiCoordinate& c : family.coords) {
            CHECK(std::fabs(quad_phi_moment(c, 0, false)) <= 1e-8);
            CHECK(std::fabs(quad_phi_moment(c, 0, true) - 1.0) <= 1e-8);
        }
    }
}

TEST_CASE("phi evaluation branches") {
    const PhiFamily family = build_trimmed_spearman(3, 0.05, 0.95, 0.02);
    const PhiCoordinate& c = family.coords[1];
    CHECK(eval_phi(family, 2, c.lo - 0.01) == 0.0);
    CHECK(eval_phi(family, 2, c.hi + 0.01) == 0.0);
    CHECK(eval_phi(family, 2, 0.001) == 0.0);
    CHECK(eval_phi(family, 2, c.center) == 0.0);
    // plateau branch: phi(u) = scale * (u - center) * plateau
    const double u = 0.5 * (c.lo + c.delta + c.hi - c.delta) + 0.3 * (c.hi - c.lo - 2 * c.delta) / 2;
    CHECK(eval_phi(family, 2, u) == doctest::Approx(c.scale * (u - c.center) * c.plateau));
    CHECK_THROWS_AS(eval_phi(family, 0, 0.5), domain_error);
    CHECK_THROWS_AS(eval_phi(family, 4, 0.5), domain_error);
}

TEST_CASE("phi is Lipschitz on the unit interval") {
    const PhiFamily family = build_trimmed_spearman(4, 0.02, 0.98, 0.01);
    for (std::size_t k = 1; k <= 4; ++k) {
        double max_slope = 0.0;
        for (int g = 0; g < 4000; ++g) {
            const double u = g / 4000.0;
            const double v = u + 1.0 / 4000.0;
            max_slope = std::max(
                max_slope, std::fabs(eval_phi(family, k, v) - eval_phi(family, k, u)) * 4000.0);
        }
        const PhiCoordinate& c = family.coords[k - 1];
        // slope is bounded by scale * (plateau + width * plateau / delta)
        const double bound = c.scale * c.plateau * (1.0 + (c.hi - c.lo) / c.delta) * 1.01;
        CHECK(max_slope <= bound);
    }
}

TEST_CASE("sigma matrix of the partition family is the identity") {
    for (std::size_t q : {1u, 3u, 5u}) {
        const PhiFamily family = build_trimmed_spearman(q, 0.01, 0.99, 0.01);
        const Matrix sigma = sigma_matrix(family);
        for (std::size_t k = 0; k < q; ++k)
            for (std::size_t s = 0; s < q; ++s)
                CHECK(std::fabs(sigma(k, s) - (k == s ? 1.0 : 0.0)) <= 1e-8);
    }
}

TEST_CASE("sigma matrix matches quadrature for overlapping coordinates") {
    // splice two partitions so supports genuinely overlap
    const PhiFamily a = build_trimmed_spearman(2, 0.05, 0.95, 0.02);
    const PhiFamily b = build_trimmed_spearman(3, 0.10, 0.80, 0.03);
    PhiFamily mixed;
    mixed.q = 4;
    mixed.tau_min = 0.05;
    mixed.tau_max = 0.95;
    mixed.coords = {a.coords[0], a.coords[1], b.coords[0], b.coords[2]};

    const Matrix sigma = sigma_matrix(mixed);
    for (std::size_t k = 0; k < 4; ++k) {
        for (std::size_t s = 0; s < 4; ++s) {
            const PhiCoordinate& ck = mixed.coords[k];
            const PhiCoordinate& cs = mixed.coords[s];
            std::vector<double> breaks = coordinate_breaks(ck);
            const std::vector<double> more = coordinate_breaks(cs);
            breaks.insert(breaks.end(), more.begin(), more.end());
            const double oracle = oracles::integrate_piecewise(
                [&](double u) { return ck.phi(u) * cs.phi(u); }, breaks, 1e-13);
            CHECK(std::fabs(sigma(k, s) - oracle) <= 1e-8);
        }
    }
}

TEST_CASE("rho_hat on residuals outside every support is zero") {
    const PhiFamily family = build_trimmed_spearman(2, 0.2, 0.8, 0.05);
    const std::vector<double> u1 = {0.01, 0.05, 0.1};
    const std::vector<double> u2 = {0.9, 0.95, 0.99};
    const Matrix rho = rho_hat(u1, u1, family);
    for (double v : rho.data) CHECK(v == 0.0);
    const Matrix rho2 = rho_hat(u1, u2, family);
    for (double v : rho2.data) CHECK(v == 0.0);
}

TEST_CASE("rho_hat equals the direct two-term evaluation") {
    const PhiFamily family = build_trimmed_spearman(1, 0.01, 0.99, 0.01);
    const std::vector<double> u1 = {0.3, 0.7};
    const std::vector<double> u2 = {0.3, 0.7};
    const Matrix rho = rho_hat(u1, u2, family);
    const PhiCoordinate& c = family.coords[0];
    const double direct = 0.5 * (c.phi(0.3) * c.phi(0.3) + c.phi(0.7) * c.phi(0.7));
    CHECK(rho(0, 0) == doctest::Approx(direct).epsilon(1e-15));
}

TEST_CASE("rho_hat is invariant under joint permutations") {
    const PhiFamily family = build_trimmed_spearman(3, 0.01, 0.99, 0.01);
    Rng rng(6);
    std::vector<double> u1(257), u2(257);
    for (std::size_t i = 0; i < u1.size(); ++i) {
        u1[i] = rng.uniform();
        u2[i] = rng.uniform();
    }
    const Matrix rho = rho_hat(u1, u2, family);
    std::vector<double> v1(u1.rbegin(), u1.rend());
    std::vector<double> v2(u2.rbegin(), u2.rend());
    const Matrix rho_rev = rho_hat(v1, v2, family);
    for (std::size_t e = 0; e < rho.data.size(); ++e)
        CHECK(rho.data[e] == doctest::Approx(rho_rev.data[e]).epsilon(1e-12));
    CHECK_THROWS_AS(rho_hat(u1, {0.5}, family), shape_error);
}

TEST_CASE("blocked rho_hat agrees with the serial reference") {
    const PhiFamily family = build_trimmed_spearman(4, 0.01, 0.99, 0.01);
    Rng rng(13);
    std::vector<double> u1(10000), u2(10000);
    for (std::size_t i = 0; i < u1.size(); ++i) {
        u1[i] = rng.uniform();
        u2[i] = rng.uniform();
    }
    const Matrix a = rho_hat(u1, u2, family);
    const Matrix b = rho_hat_reference(u1, u2, family);
    for (std::size_t e = 0; e < a.data.size(); ++e)
        CHECK(a.data[e] == doctest::Approx(b.data[e]).epsilon(1e-12));
}

TEST_CASE("chi-square statistic edge cases") {
    const Matrix zero(2, 2, 0.0);
    Matrix eye(2, 2, 0.0);
    eye(0, 0) = eye(1, 1) = 1.0;
    const TestResult null_result = chi_square_statistic(zero, eye, 100, 0.05);
    CHECK(null_result.statistic == 0.0);
    CHECK(null_result.p_value == 1.0);
    CHECK_FALSE(null_result.reject);
    CHECK(null_result.df == 4);

    Matrix rho(2, 2, 0.0);
    rho(0, 0) = 0.3;
    rho(0, 1) = -0.2;
    rho(1, 0) = 0.1;
    rho(1, 1) = 0.05;
    const TestResult r = chi_square_statistic(rho, eye, 50, 0.05);
    double frob = 0.0;
    for (double v : rho.data) frob += v * v;
    CHECK(r.statistic == doctest::Approx(frob).epsilon(1e-12));
    CHECK(r.n_t_n == doctest::Approx(50.0 * frob).epsilon(1e-12));
}

TEST_CASE("chi-square p-value near the 5% critical point") {
    Matrix rho(1, 1, 0.0);
    const double n = 1.0;
    rho(0, 0) = std::sqrt(3.8415);
    const Matrix eye(1, 1, 1.0);
    const TestResult r = chi_square_statistic(rho, eye, static_cast<std::size_t>(n), 0.05);
    CHECK(std::fabs(r.p_value - 0.05) < 1e-3);
}

TEST_CASE("scaling rho by two scales the statistic by exactly four") {
    const PhiFamily family = build_trimmed_spearman(2, 0.01, 0.99, 0.01);
    Rng rng(3);
    std::vector<double> u1(500), u2(500);
    for (std::size_t i = 0; i < u1.size(); ++i) {
        u1[i] = rng.uniform();
        u2[i] = rng.uniform();
    }
    const Matrix rho = rho_hat(u1, u2, family);
    Matrix scaled = rho;
    for (double& v : scaled.data) v *= 2.0;
    const Matrix sigma = sigma_matrix(family);
    const TestResult base = chi_square_statistic(rho, sigma, 500, 0.05);
    const TestResult twice = chi_square_statistic(scaled, sigma, 500, 0.05);
    CHECK(twice.statistic == 4.0 * base.statistic);
}

TEST_CASE("duplicated coordinates surface as a degeneracy error") {
    const PhiFamily one = build_trimmed_spearman(1, 0.01, 0.99, 0.01);
    PhiFamily duplicated;
    duplicated.q = 2;
    duplicated.tau_min = 0.01;
    duplicated.tau_max = 0.99;
    duplicated.coords = {one.coords[0], one.coords[0]};
    const Matrix sigma = sigma_matrix(duplicated);
    CHECK(sigma(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    const Matrix rho(2, 2, 0.1);
    CHECK_THROWS_AS(chi_square_statistic(rho, sigma, 100, 0.05), degeneracy_error);
}

TEST_CASE("oracle-residual null calibration follows the chi-squared law") {
    // true uniforms fed straight into the statistic, no estimation stage
    const std::size_t reps = 800;
    const std::size_t n = 1000;
    for (std::size_t q : {1u, 3u}) {
        const PhiFamily family = build_trimmed_spearman(q, 0.01, 0.99, 0.01);
        const Matrix sigma = sigma_matrix(family);
        std::vector<double> stats(reps);
        parallel_for(reps, [&](std::size_t rep) {
            Rng rng(derive_seed(4242, rep));
            std::vector<double> u1(n), u2(n);
            for (std::size_t i = 0; i < n; ++i) {
                u1[i] = rng.uniform();
                u2[i] = rng.uniform();
            }
            const Matrix rho = rho_hat(u1, u2, family);
            stats[rep] = chi_square_statistic(rho, sigma, n, 0.05).n_t_n;
        });
        std::vector<double> cdf_values(reps);
        for (std::size_t rep = 0; rep < reps; ++rep)
            cdf_values[rep] = chi2_cdf(stats[rep], static_cast<double>(q * q));
        CHECK(ks_from_cdf_values(cdf_values) <= 0.06);
    }
}

TEST_CASE("pc_test holds level on independent uniforms") {
    const std::size_t reps = 300;
    const std::size_t n = 500;
    std::vector<int> rejects(reps, 0);
    parallel_for(reps, [&](std::size_t rep) {
        Rng rng(derive_seed(99, rep));
        Dataset data;
        data.n = n;
        data.d = 1;
        data.z_names = {"z1"};
        for (std::size_t i = 0; i < n; ++i) {
            data.x.push_back(rng.uniform());
            data.y.push_back(rng.uniform());
            data.z.push_back(rng.uniform());
        }
        PcConfig config;
        config.q = 1;
        config.alpha = 0.05;
        config.basis_x = BasisSpec::additive_uniform(BasisSpec::polynomial(1), 1);
        config.basis_y = config.basis_x;
        config.penalty_sims = 200;
        config.seed = derive_seed(100, rep);
        rejects[rep] = pc_test(data, config).reject ? 1 : 0;
    });
    double rate = 0.0;
    for (int r : rejects) rate += r;
    rate /= static_cast<double>(reps);
    CHECK(rate >= 0.02);
    CHECK(rate <= 0.09);
}

TEST_CASE("pc_test is deterministic given the seed") {
    Rng rng(1);
    Dataset data;
    data.n = 120;
    data.d = 2;
    data.z_names = {"z1", "z2"};
    for (std::size_t i = 0; i < data.n; ++i) {
        data.x.push_back(rng.normal());
        data.y.push_back(rng.normal());
        data.z.push_back(rng.uniform());
        data.z.push_back(rng.uniform());
    }
    PcConfig config;
    config.q = 2;
    config.seed = 31337;
    config.penalty_sims = 150;
    const TestResult a = pc_test(data, config);
    const TestResult b = pc_test(data, config);
    CHECK(a.p_value == b.p_value);
    CHECK(a.statistic == b.statistic);
    CHECK(a.rho.data == b.rho.data);
    CHECK(test_result_to_json(a).dump() == test_result_to_json(b).dump());
}

TEST_CASE("pc_test output is invariant under monotone marginal transforms") {
    Rng rng(71);
    Dataset data;
    data.n = 150;
    data.d = 1;
    data.z_names = {"z1"};
    for (std::size_t i = 0; i < data.n; ++i) {
        data.x.push_back(rng.normal());
        data.y.push_back(rng.normal() + 0.5 * data.x.back());
        data.z.push_back(rng.normal());
    }
    Dataset warped = data;
    for (double& v : warped.x) v = v * v * v;
    for (double& v : warped.z) v = std::exp(v);

    PcConfig config;
    config.q = 1;
    config.seed = 5;
    config.penalty_sims = 150;
    const TestResult a = pc_test(data, config);
    const TestResult b = pc_test(warped, config);
    CHECK(a.p_value == b.p_value);
    CHECK(a.n_t_n == b.n_t_n);
}

TEST_CASE("pc_test with several q shares one pair of fits") {
    Rng rng(123);
    Dataset data;
    data.n = 200;
    data.d = 1;
    data.z_names = {"z1"};
    for (std::size_t i = 0; i < data.n; ++i) {
        data.x.push_back(rng.normal());
        data.y.push_back(rng.normal());
        data.z.push_back(rng.uniform());
    }
    PcConfig config;
    config.penalty_sims = 150;
    config.seed = 17;
    const std::vector<TestResult> multi = pc_test_multi(data, config, {1, 2, 3});
    REQUIRE(multi.size() == 3);
    config.q = 2;
    const TestResult direct = pc_test(data, config);
    CHECK(multi[1].p_value == direct.p_value);
    CHECK(multi[0].df == 1);
    CHECK(multi[2].df == 9);
}
