#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "pcci/errors.hpp"
#include "pcci/special.hpp"

using namespace pcci;

TEST_CASE("normal cdf and quantile invert each other") {
    for (double p : {1e-8, 1e-4, 0.01, 0.2, 0.5, 0.8, 0.99, 1.0 - 1e-6}) {
        CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
    }
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK_THROWS_AS(normal_quantile(0.0), domain_error);
}

TEST_CASE("chi-squared cdf matches quadrature of the density") {
    // density integrated by an independent adaptive rule
    auto density = [](double k) {
        return [k](double t) {
            return std::exp((0.5 * k - 1.0) * std::log(t) - 0.5 * t -
                            std::lgamma(0.5 * k) - 0.5 * k * std::log(2.0));
        };
    };
    for (double k : {1.0, 4.0, 9.0, 25.0}) {
        for (double x : {0.5, 2.0, 7.5, 20.0}) {
            double by_quadrature;
            if (k == 1.0) {
                // substituting t = s^2 removes the singularity at 0:
                // t^{-1/2} e^{-t/2} / (sqrt(2) Gamma(1/2)) dt = 2 phi(s) ds
                by_quadrature = oracles::integrate(
                    [](double s) {
                        return 2.0 * std::exp(-0.5 * s * s) / std::sqrt(6.283185307179586);
                    },
                    0.0, std::sqrt(x));
            } else {
                by_quadrature = oracles::integrate(density(k), 0.0, x);
            }
            CHECK(chi2_cdf(x, k) == doctest::Approx(by_quadrature).epsilon(1e-9));
        }
    }
}

TEST_CASE("chi-squared survival at the 0.95 quantile of one degree of freedom") {
    CHECK(chi2_sf(3.8415, 1.0) == doctest::Approx(0.05).epsilon(2e-2));
    CHECK(std::fabs(chi2_sf(3.8415, 1.0) - 0.05) < 1e-3);
    CHECK(chi2_quantile(0.95, 1.0) == doctest::Approx(3.841458820694124).epsilon(1e-10));
}

TEST_CASE("chi-squared quantile inverts the cdf") {
    for (double k : {1.0, 2.0, 9.0}) {
        for (double p : {0.01, 0.5, 0.95, 0.999}) {
            CHECK(chi2_cdf(chi2_quantile(p, k), k) == doctest::Approx(p).epsilon(1e-10));
        }
    }
}

TEST_CASE("ks statistic of a three-point sample") {
    CHECK(ks_uniform({0.25, 0.5, 0.75}) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("ks statistic agrees with a dense-grid sup oracle") {
    std::vector<double> sample = {0.9, 0.05, 0.3, 0.300001, 0.77, 0.12, 0.5};
    CHECK(ks_uniform(sample) ==
          doctest::Approx(oracles::ks_uniform_dense(sample)).epsilon(1e-4));
    CHECK_THROWS_AS(ks_uniform({}), empty_data_error);
}
