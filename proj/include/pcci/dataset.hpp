#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace pcci {

// One sample of n observations (x_i, y_i, z_i) with scalar x, y and a
// d-dimensional covariate vector z. `transformed` records whether the
// marginal rank transform has been applied, in which case every value lies
// strictly inside (0, 1).
struct Dataset {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> z;  // row-major, n

    std::size_t n = 0;
    std::size_t d = 0;
    bool transformed = false;

    std::string x_name = "x";
    std::string y_name = "y";
    std::vector<std::string> z_names;

    double z_at(std::size_t i, std::size_t j) const { return z[i * d + j]; }
    const double* z_row(std::size_t i) const { return z.data() + i * d; }

    void validate() const;  // throws on inconsistent shape or broken invariants
};

struct ColumnSpec {
    std::string x;
    std::string y;
    std::vector<std::string> z;
};

// Reads a comma-separated file with a header row; the designated columns must
// parse as finite reals. d is inferred from the number of z columns.
Dataset load_csv(const std::string& path, const ColumnSpec& columns);

// Writes columns in the order x, y, z1..zd with full round-trip precision.
void save_csv(const Dataset& data, const std::string& path);

// Average ranks (1-based, ties averaged) of the values in a column.
std::vector<double> average_ranks(const std::vector<double>& values);

// Pseudo copula observations: every coordinate is replaced by
// rank/(n+1), mapping the sample into the open unit cube.
Dataset to_pseudo_obs(const Dataset& data);

}  // namespace pcci
