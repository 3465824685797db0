#pragma once

#include "pcci/basis.hpp"
#include "pcci/dataset.hpp"
#include "pcci/gencorr.hpp"

namespace pcci {

struct MeanRegressionSpec {
    BasisSpec basis;
    double ridge = 0.0;
};

// Generalised covariance measure: least-squares regressions of x and y on the
// basis expansion of z, then a normalized-mean test of the residual products.
TestResult gcm_test(const Dataset& data, const MeanRegressionSpec& spec_x,
                    const MeanRegressionSpec& spec_y, double alpha);

// Nonparanormal partial correlation: map pseudo-observations through the
// standard normal quantile function, compute the partial correlation of x and
// y given z from regression residuals, and refer the Fisher transform
// sqrt(n - d - 3) * atanh(r) to a standard normal.
TestResult npn_test(const Dataset& data, double alpha);

}  // namespace pcci
