#include "pcci/basis.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "pcci/errors.hpp"

namespace pcci {

std::size_t BasisSpec::dimension() const {
    std::size_t p = includes_intercept ? 1 : 0;
    switch (kind) {
        case Kind::polynomial: return p + degree;
        case Kind::bspline: return p + df;
        case Kind::additive:
            for (const auto& c : components) p += c.dimension();
            return p;
    }
    return p;
}

std::size_t BasisSpec::input_dimension() const {
    if (kind == Kind::additive) return components.size();
    return 1;
}

namespace {

void validate_block(const BasisSpec& s) {
    switch (s.kind) {
        case BasisSpec::Kind::polynomial:
            break;
        case BasisSpec::Kind::bspline: {
            if (s.order < 1) throw domain_error("bspline order must be >= 1");
            if (s.df < s.order) throw domain_error("bspline df must be >= order");
            if (!s.knots.empty()) {
                if (s.knots.size() != s.df + s.order)
                    throw domain_error("bspline knot vector must have df + order entries");
                if (!std::is_sorted(s.knots.begin(), s.knots.end()))
                    throw domain_error("bspline knot vector must be nondecreasing");
                if (s.knots.front() != 0.0 || s.knots.back() != 1.0)
                    throw domain_error("bspline boundary knots must be 0 and 1");
            }
            break;
        }
        case BasisSpec::Kind::additive:
            for (const auto& c : s.components) {
                if (c.kind == BasisSpec::Kind::additive)
                    throw domain_error("additive basis components must be per-coordinate");
                if (c.includes_intercept)
                    throw domain_error("additive components must not carry an intercept");
                validate_block(c);
            }
            break;
    }
}

}  // namespace

void BasisSpec::validate() const {
    validate_block(*this);
    if (dimension() < 1) throw domain_error("basis dimension must be >= 1");
}

BasisSpec BasisSpec::polynomial(std::size_t degree) {
    BasisSpec s;
    s.kind = Kind::polynomial;
    s.degree = degree;
    return s;
}

BasisSpec BasisSpec::bspline(std::size_t df, std::size_t order, std::vector<double> knots) {
    BasisSpec s;
    s.kind = Kind::bspline;
    s.df = df;
    s.order = order;
    s.knots = std::move(knots);
    return s;
}

BasisSpec BasisSpec::additive(std::vector<BasisSpec> components) {
    BasisSpec s;
    s.kind = Kind::additive;
    s.includes_intercept = true;
    s.components = std::move(components);
    return s;
}

BasisSpec BasisSpec::additive_uniform(const BasisSpec& component, std::size_t d) {
    return additive(std::vector<BasisSpec>(d, component));
}

BasisSpec BasisSpec::intercept_only() {
    BasisSpec s = additive({});
    return s;
}

namespace {

// Full (clamped) knot vector: `order` copies of each boundary plus equally
// spaced interior knots.
std::vector<double> default_knots(std::size_t df, std::size_t order) {
    const std::size_t interior = df - order;
    std::vector<double> t(df + order);
    for (std::size_t i = 0; i < order; ++i) t[i] = 0.0;
    for (std::size_t i = 0; i < interior; ++i)
        t[order + i] = static_cast<double>(i + 1) / static_cast<double>(interior + 1);
    for (std::size_t i = 0; i < order; ++i) t[df + i] = 1.0;
    return t;
}

// Cox-de Boor evaluation of all df B-spline basis values at u in [0, 1].
void bspline_block(const BasisSpec& spec, double u, double* out) {
    const std::vector<double> own =
        spec.knots.empty() ? default_knots(spec.df, spec.order) : std::vector<double>();
    const std::vector<double>& t = spec.knots.empty() ? own : spec.knots;
    const std::size_t df = spec.df;
    const std::size_t k = spec.order;

    std::fill(out, out + df, 0.0);

    // locate the knot span [t[mu], t[mu+1]) containing u; close the right end
    std::size_t mu = k - 1;
    while (mu + 1 < df && u >= t[mu + 1]) ++mu;

    // triangular recurrence over degrees 1..k, nonzero entries only
    std::vector<double> N(k, 0.0);
    N[0] = 1.0;
    for (std::size_t deg = 1; deg < k; ++deg) {
        double saved = 0.0;
        for (std::size_t r = 0; r < deg; ++r) {
            const std::size_t i = mu - deg + 1 + r;
            const double den = t[i + deg] - t[i];
            const double term = den > 0.0 ? N[r] / den : 0.0;
            N[r] = saved + (t[i + deg] - u) * term;
            saved = (u - t[i]) * term;
        }
        N[deg] = saved;
    }
    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t idx = mu - k + 1 + r;
        if (idx < df) out[idx] = N[r];
    }
}

void expand_block(const BasisSpec& spec, double u, double* out) {
    if (spec.kind == BasisSpec::Kind::polynomial) {
        double v = 1.0;
        for (std::size_t g = 0; g < spec.degree; ++g) {
            v *= u;
            out[g] = v;
        }
    } else {
        bspline_block(spec, u, out);
    }
}

}  // namespace

void expand(const BasisSpec& spec, std::span<const double> z, std::vector<double>& out) {
    if (z.size() != spec.input_dimension())
        throw shape_error("basis expects a " + std::to_string(spec.input_dimension()) +
                          "-vector, got " + std::to_string(z.size()) + " coordinates");
    out.resize(spec.dimension());
    double* p = out.data();
    if (spec.includes_intercept) *p++ = 1.0;
    if (spec.kind == BasisSpec::Kind::additive) {
        for (std::size_t j = 0; j < spec.components.size(); ++j) {
            expand_block(spec.components[j], z[j], p);
            p += spec.components[j].dimension();
        }
    } else {
        expand_block(spec, z[0], p);
    }
}

std::vector<double> expand(const BasisSpec& spec, std::span<const double> z) {
    std::vector<double> out;
    expand(spec, z, out);
    return out;
}

std::vector<double> design_matrix(const BasisSpec& spec, const std::vector<double>& z,
                                  std::size_t n, std::size_t d) {
    if (z.size() != n * d) throw shape_error("covariate matrix shape mismatch");
    const std::size_t p = spec.dimension();
    std::vector<double> W(n * p);
    std::vector<double> row;
    for (std::size_t i = 0; i < n; ++i) {
        expand(spec, std::span<const double>(z.data() + i * d, d), row);
        std::copy(row.begin(), row.end(), W.begin() + i * p);
    }
    return W;
}

nlohmann::json basis_to_json(const BasisSpec& spec) {
    nlohmann::json j;
    switch (spec.kind) {
        case BasisSpec::Kind::polynomial:
            j["kind"] = "polynomial";
            j["degree"] = spec.degree;
            break;
        case BasisSpec::Kind::bspline:
            j["kind"] = "bspline";
            j["df"] = spec.df;
            j["order"] = spec.order;
            if (!spec.knots.empty()) j["knots"] = spec.knots;
            break;
        case BasisSpec::Kind::additive: {
            j["kind"] = "additive";
            nlohmann::json comps = nlohmann::json::array();
            for (const auto& c : spec.components) comps.push_back(basis_to_json(c));
            j["components"] = comps;
            break;
        }
    }
    j["intercept"] = spec.includes_intercept;
    return j;
}

BasisSpec basis_from_json(const nlohmann::json& j) {
    BasisSpec s;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "polynomial") {
        s.kind = BasisSpec::Kind::polynomial;
        s.degree = j.at("degree").get<std::size_t>();
    } else if (kind == "bspline") {
        s.kind = BasisSpec::Kind::bspline;
        s.df = j.at("df").get<std::size_t>();
        s.order = j.value("order", std::size_t{4});
        if (j.contains("knots")) s.knots = j.at("knots").get<std::vector<double>>();
    } else if (kind == "additive") {
        s.kind = BasisSpec::Kind::additive;
        for (const auto& c : j.at("components")) s.components.push_back(basis_from_json(c));
    } else {
        throw domain_error("unknown basis kind: " + kind);
    }
    s.includes_intercept = j.value("intercept", kind == "additive");
    s.validate();
    return s;
}

}  // namespace pcci
