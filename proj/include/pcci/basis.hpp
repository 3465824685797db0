#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace pcci {

// Deterministic feature expansion h(z) used as the regression design.
// A spec is either a single-coordinate expansion (polynomial or B-spline
// block, no constant term) or an additive expansion over all coordinates
// with an intercept prepended.
struct BasisSpec {
    enum class Kind { polynomial, bspline, additive };

    Kind kind = Kind::polynomial;
    bool includes_intercept = false;

    // polynomial
    std::size_t degree = 1;

    // bspline: df basis functions of the given order (cubic = 4) on [0, 1].
    // An empty knot vector means equally spaced interior knots.
    std::size_t df = 5;
    std::size_t order = 4;
    std::vector<double> knots;

    // additive
    std::vector<BasisSpec> components;

    std::size_t dimension() const;        // p, including the intercept if present
    std::size_t input_dimension() const;  // d

    void validate() const;

    // Convenience factories matching the expansions used throughout.
    static BasisSpec polynomial(std::size_t degree);
    static BasisSpec bspline(std::size_t df, std::size_t order = 4,
                             std::vector<double> knots = {});
    static BasisSpec additive(std::vector<BasisSpec> components);
    // d identical per-coordinate blocks plus an intercept.
    static BasisSpec additive_uniform(const BasisSpec& component, std::size_t d);
    static BasisSpec intercept_only();
};

// Evaluates h(z) into `out` (resized to spec.dimension()).
void expand(const BasisSpec& spec, std::span<const double> z, std::vector<double>& out);
std::vector<double> expand(const BasisSpec& spec, std::span<const double> z);

// Row-major n x p design matrix of basis expansions of each z row.
std::vector<double> design_matrix(const BasisSpec& spec, const std::vector<double>& z,
                                  std::size_t n, std::size_t d);

// JSON configuration fragment (kind, degree/df/order/knots, components).
nlohmann::json basis_to_json(const BasisSpec& spec);
BasisSpec basis_from_json(const nlohmann::json& j);

}  // namespace pcci
