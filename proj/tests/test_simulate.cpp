#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "pcci/errors.hpp"
#include "pcci/rng.hpp"
#include "pcci/simulate.hpp"
#include "pcci/special.hpp"

using namespace pcci;

namespace {

std::pair<double, double> mean_var(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    return {mean, var};
}

double sample_cov(const std::vector<double>& a, const std::vector<double>& b) {
    const auto [ma, _va] = mean_var(a);
    const auto [mb, _vb] = mean_var(b);
    double cov = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) cov += (a[i] - ma) * (b[i] - mb);
    return cov / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("error samplers match their analytic moments") {
    const std::size_t n = 100000;
    Rng rng(2718);
    std::vector<double> gumbel(n), normal(n);
    for (std::size_t i = 0; i < n; ++i) {
        gumbel[i] = rng.gumbel();
        normal[i] = rng.normal();
    }
    const auto [gm, gv] = mean_var(gumbel);
    CHECK(std::fabs(gm - 0.5772) < 0.02);
    CHECK(std::fabs(gv - 1.6449) < 0.02);
    const auto [nm, nv] = mean_var(normal);
    CHECK(std::fabs(nm) < 0.02);
    CHECK(std::fabs(nv - 1.0) < 0.02);
}

TEST_CASE("asymmetric laplace sampler hits its analytic median") {
    const double kappa = 0.8;
    // for X = E1/kappa - kappa E2 the median solves
    // P(X > m) = exp(-kappa m) / (1 + kappa^2) = 1/2
    const double median = std::log(2.0 / (1.0 + kappa * kappa)) / kappa;
    const std::size_t n = 100000;
    Rng rng(99);
    std::size_t below = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (rng.asymmetric_laplace(kappa) <= median) ++below;
    CHECK(std::fabs(static_cast<double>(below) / static_cast<double>(n) - 0.5) < 0.01);
}

TEST_CASE("replicate seed streams are pairwise uncorrelated") {
    const std::size_t n = 10000;
    Rng a(derive_seed(7, 0));
    Rng b(derive_seed(7, 1));
    std::vector<double> ua(n), ub(n);
    for (std::size_t i = 0; i < n; ++i) {
        ua[i] = a.uniform();
        ub[i] = b.uniform();
    }
    const double cov = sample_cov(ua, ub);
    const double corr = cov / std::sqrt(mean_var(ua).second * mean_var(ub).second);
    CHECK(std::fabs(corr) < 0.02);
}

TEST_CASE("H2 with zeroed coefficients degenerates to independent normals") {
    DgpSpec spec;
    spec.id = DgpId::H2;
    spec.d = 3;
    DgpCoefficients coef;
    coef.f1_lin.assign(3, 0.0);
    coef.f2_lin.assign(3, 0.0);
    Rng rng(5);
    const Dataset data = sample_dgp_with(spec, coef, 50000, rng);
    const auto [mx, vx] = mean_var(data.x);
    const auto [my, vy] = mean_var(data.y);
    CHECK(std::fabs(mx) < 0.02);
    CHECK(std::fabs(vx - 1.0) < 0.03);
    CHECK(std::fabs(my) < 0.02);
    CHECK(std::fabs(vy - 1.0) < 0.03);
    CHECK(std::fabs(sample_cov(data.x, data.y)) < 0.02);
}

TEST_CASE("alternative-process coefficients are drawn from the sign sets") {
    DgpSpec a2;
    a2.id = DgpId::A2;
    a2.d = 4;
    Rng rng(1);
    const DgpCoefficients c2 = draw_dgp_coefficients(a2, rng);
    REQUIRE(c2.f1_lin.size() == 4);
    REQUIRE(c2.f2_lin.size() == 5);  // the extra slot multiplies x
    for (double v : c2.f1_lin) CHECK(std::fabs(v) == 1.0);
    for (double v : c2.f2_lin) CHECK(std::fabs(v) == 1.0);

    DgpSpec a4;
    a4.id = DgpId::A4;
    a4.d = 2;
    const DgpCoefficients c4 = draw_dgp_coefficients(a4, rng);
    REQUIRE(c4.g1_lin.size() == 2);
    REQUIRE(c4.g2_quad.size() == 3);
    for (double v : c4.g1_lin) CHECK(std::fabs(v) == 5.0);
    for (double v : c4.g2_quad) CHECK(std::fabs(v) == 5.0);

    DgpSpec h3;
    h3.id = DgpId::H3;
    h3.d = 2;
    const DgpCoefficients c3 = draw_dgp_coefficients(h3, rng);
    REQUIRE(c3.f2_lin.size() == 2);  // null processes never see x
}

TEST_CASE("alternative processes feed x into the second response") {
    DgpSpec spec;
    spec.id = DgpId::A2;
    spec.d = 1;
    DgpCoefficients coef;
    coef.f1_lin = {0.0};
    coef.f2_lin = {0.0, 1.0};  // y = x + noise
    Rng rng(8);
    const Dataset data = sample_dgp_with(spec, coef, 20000, rng);
    const double cov = sample_cov(data.x, data.y);
    CHECK(std::fabs(cov - 1.0) < 0.05);  // cov(x, x + e) = var(x) = 1
}

TEST_CASE("covariates are uniform on [-1, 1]") {
    DgpSpec spec;
    spec.id = DgpId::H4;
    spec.d = 2;
    const Dataset data = sample_dgp(spec, 20000, 123);
    double lo = 1e9, hi = -1e9, mean = 0.0;
    for (double v : data.z) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        mean += v;
    }
    mean /= static_cast<double>(data.z.size());
    CHECK(lo >= -1.0);
    CHECK(hi <= 1.0);
    CHECK(lo < -0.99);
    CHECK(hi > 0.99);
    CHECK(std::fabs(mean) < 0.02);
    CHECK_FALSE(data.transformed);
}

TEST_CASE("local alternative scales the common factor as gamma0_sq / sqrt(n)") {
    // beta = 0: cov(x, y) = gamma^2 exactly
    const std::size_t n = 400;
    const Dataset data = sample_local_alternative(0.0, 100.0, n, 77);
    CHECK(data.d == 1);
    // gamma^2 = 100 / 20 = 5
    Dataset big = sample_local_alternative(0.0, 100.0, 40000, 78);
    // at n = 40000, gamma^2 = 0.5
    CHECK(std::fabs(sample_cov(big.x, big.y) - 0.5) < 0.05);

    const Dataset null_data = sample_local_alternative(0.0, 0.0, 40000, 79);
    CHECK(std::fabs(sample_cov(null_data.x, null_data.y)) < 0.02);
    const auto [mx, vx] = mean_var(null_data.x);
    CHECK(std::fabs(mx) < 0.02);
    CHECK(std::fabs(vx - 1.0) < 0.03);
    (void)data;
}

TEST_CASE("local alternative z lives on the unit interval") {
    const Dataset data = sample_local_alternative(20.0, 100.0, 1000, 3);
    for (double z : data.z) {
        CHECK(z > 0.0);
        CHECK(z < 1.0);
    }
}

TEST_CASE("run_study bookkeeping: p-values plus failures add up") {
    StudyConfig study;
    study.dgp.id = DgpId::H2;
    study.dgp.d = 2;
    study.n = 5;  // npn requires n > d + 3 = 5, so it fails every replicate
    study.replicates = 6;
    study.master_seed = 11;
    StudyTest gcm;
    gcm.kind = StudyTest::Kind::gcm;
    gcm.name = "gcm";
    gcm.basis = BasisSpec::additive_uniform(BasisSpec::polynomial(1), 2);
    StudyTest npn;
    npn.kind = StudyTest::Kind::npn;
    npn.name = "npn";
    study.tests = {gcm, npn};
    const SimReport report = run_study(study);
    CHECK(report.tests[0].p_values.size() + report.tests[0].failures == 6);
    CHECK(report.tests[1].failures == 6);
    CHECK(report.tests[1].p_values.empty());
}

TEST_CASE("ks statistic in the report matches the dense-grid oracle") {
    StudyConfig study;
    study.dgp.id = DgpId::H2;
    study.dgp.d = 1;
    study.n = 60;
    study.replicates = 9;
    study.master_seed = 21;
    StudyTest gcm;
    gcm.kind = StudyTest::Kind::gcm;
    gcm.name = "gcm";
    gcm.basis = BasisSpec::additive_uniform(BasisSpec::polynomial(1), 1);
    study.tests = {gcm};
    const SimReport report = run_study(study);
    REQUIRE(report.tests[0].p_values.size() == 9);
    CHECK(report.tests[0].ks_uniform ==
          doctest::Approx(oracles::ks_uniform_dense(report.tests[0].p_values)).epsilon(1e-3));
}

TEST_CASE("same master seed reproduces the report bit for bit") {
    StudyConfig study;
    study.dgp.id = DgpId::A2;
    study.dgp.d = 2;
    study.n = 120;
    study.replicates = 5;
    study.master_seed = 99;
    StudyTest pc;
    pc.kind = StudyTest::Kind::pc;
    pc.name = "pc:q=1";
    pc.q = 1;
    pc.basis = BasisSpec::additive_uniform(BasisSpec::polynomial(1), 2);
    StudyTest npn;
    npn.kind = StudyTest::Kind::npn;
    npn.name = "npn";
    study.tests = {pc, npn};
    study.pc_defaults.penalty_sims = 120;
    const SimReport a = run_study(study);
    const SimReport b = run_study(study);
    for (std::size_t t = 0; t < study.tests.size(); ++t) {
        CHECK(a.tests[t].p_values == b.tests[t].p_values);
        CHECK(a.tests[t].rejection_rate == b.tests[t].rejection_rate);
    }
}

TEST_CASE("dgp identifiers round trip") {
    for (const char* name : {"H1", "H2", "H3", "H4", "A1", "A2", "A3", "A4", "LOCAL"})
        CHECK(dgp_to_string(dgp_from_string(name)) == name);
    CHECK_THROWS_AS(dgp_from_string("H9"), domain_error);
    CHECK(dgp_is_null(DgpId::H1));
    CHECK_FALSE(dgp_is_null(DgpId::A4));
    CHECK_FALSE(dgp_is_null(DgpId::LOCAL));
}

TEST_CASE("H1 uses skewed and heavy errors") {
    DgpSpec spec;
    spec.id = DgpId::H1;
    spec.d = 1;
    DgpCoefficients coef;  // all-zero forms isolate the error draws
    coef.f1_lin.assign(1, 0.0);
    coef.f1_quad.assign(1, 0.0);
    coef.g1_lin.assign(1, 0.0);
    coef.g1_quad.assign(1, 0.0);
    coef.f2_lin.assign(1, 0.0);
    coef.f2_quad.assign(1, 0.0);
    coef.g2_lin.assign(1, 0.0);
    coef.g2_quad.assign(1, 0.0);
    Rng rng(17);
    const Dataset data = sample_dgp_with(spec, coef, 100000, rng);
    // x follows the asymmetric Laplace (g1 = exp(-|0|) = 1), y the Gumbel
    const auto [my, vy] = mean_var(data.y);
    CHECK(std::fabs(my - 0.5772) < 0.02);
    CHECK(std::fabs(vy - 1.6449) < 0.04);
    std::size_t below = 0;
    const double median = std::log(2.0 / (1.0 + 0.64)) / 0.8;
    for (double v : data.x)
        if (v <= median) ++below;
    CHECK(std::fabs(static_cast<double>(below) / 100000.0 - 0.5) < 0.01);
}
