#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcci/basis.hpp"
#include "pcci/errors.hpp"
#include "pcci/rng.hpp"

using namespace pcci;

TEST_CASE("quadratic polynomial expansion with intercept") {
    const BasisSpec spec = BasisSpec::additive_uniform(BasisSpec::polynomial(2), 1);
    const std::vector<double> z = {0.5};
    CHECK(expand(spec, z) == std::vector<double>{1.0, 0.5, 0.25});
}

TEST_CASE("b-spline block is a partition of unity") {
    const BasisSpec spec = BasisSpec::additive_uniform(BasisSpec::bspline(5), 1);
    for (double u : {0.0, 1e-9, 0.1, 0.25, 0.5, 0.7, 0.999, 1.0}) {
        const std::vector<double> h = expand(spec, std::vector<double>{u});
        REQUIRE(h.size() == 6);
        CHECK(h[0] == 1.0);
        double sum = 0.0;
        for (std::size_t j = 1; j < h.size(); ++j) {
            CHECK(h[j] >= 0.0);
            CHECK(h[j] <= 1.0);
            sum += h[j];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("additive dimension bookkeeping") {
    const BasisSpec spec = BasisSpec::additive_uniform(BasisSpec::bspline(5), 3);
    CHECK(spec.dimension() == 16);
    CHECK(spec.input_dimension() == 3);
    const BasisSpec intercept = BasisSpec::additive_uniform(BasisSpec::polynomial(0), 2);
    CHECK(intercept.dimension() == 1);
}

TEST_CASE("expansion is continuous in z") {
    const BasisSpec spec = BasisSpec::additive(
        {BasisSpec::bspline(5), BasisSpec::polynomial(3), BasisSpec::bspline(7)});
    Rng rng(42);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> z = {rng.uniform(), rng.uniform(), rng.uniform()};
        std::vector<double> z2 = z;
        for (double& v : z2) v = std::min(1.0, v + 1e-9);
        const std::vector<double> a = expand(spec, z);
        const std::vector<double> b = expand(spec, z2);
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(std::fabs(a[j] - b[j]) <= 1e-6);
    }
}

TEST_CASE("dimension mismatch raises a shape error") {
    const BasisSpec spec = BasisSpec::additive_uniform(BasisSpec::polynomial(1), 2);
    CHECK_THROWS_AS(expand(spec, std::vector<double>{0.5}), shape_error);
}

TEST_CASE("invalid specs are rejected") {
    CHECK_THROWS_AS(BasisSpec::bspline(3, 4).validate(), domain_error);  // df < order
    BasisSpec bad = BasisSpec::bspline(5, 4, {0, 0, 0, 0, 0.6, 1, 1, 1, 1});
    CHECK_NOTHROW(bad.validate());
    bad.knots[4] = -0.1;
    CHECK_THROWS_AS(bad.validate(), domain_error);
}

TEST_CASE("json round trip") {
    const BasisSpec spec = BasisSpec::additive(
        {BasisSpec::bspline(6, 4), BasisSpec::polynomial(2)});
    const BasisSpec back = basis_from_json(basis_to_json(spec));
    CHECK(back.dimension() == spec.dimension());
    CHECK(back.input_dimension() == 2);
    Rng rng(1);
    for (int rep = 0; rep < 20; ++rep) {
        const std::vector<double> z = {rng.uniform(), rng.uniform()};
        CHECK(expand(spec, z) == expand(back, z));
    }
}

TEST_CASE("custom knot vectors are honored") {
    const BasisSpec spec = BasisSpec::bspline(5, 4, {0, 0, 0, 0, 0.25, 1, 1, 1, 1});
    const std::vector<double> h = expand(spec, std::vector<double>{0.25});
    double sum = 0.0;
    for (double v : h) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(spec.dimension() == 5);
}
