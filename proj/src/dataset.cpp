#include "pcci/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pcci/errors.hpp"

namespace pcci {

void Dataset::validate() const {
    if (n < 1) throw empty_data_error("dataset has no rows");
    if (x.size() != n || y.size() != n || z.size() != n * d)
        throw shape_error("dataset columns disagree on the number of rows");
    if (z_names.size() != d) throw shape_error("dataset has " + std::to_string(d) +
                                               " z columns but " +
                                               std::to_string(z_names.size()) + " z names");
    if (transformed) {
        auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
        for (double v : x)
            if (!in_unit(v)) throw domain_error("transformed dataset has x outside (0,1)");
        for (double v : y)
            if (!in_unit(v)) throw domain_error("transformed dataset has y outside (0,1)");
        for (double v : z)
            if (!in_unit(v)) throw domain_error("transformed dataset has z outside (0,1)");
    }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim surrounding whitespace
        std::size_t a = field.find_first_not_of(" \t\r");
        std::size_t b = field.find_last_not_of(" \t\r");
        out.push_back(a == std::string::npos ? std::string() : field.substr(a, b - a + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || end != begin + cell.size() || !std::isfinite(v))
        throw parse_error("row " + std::to_string(row) + ", column '" + column +
                              "': cannot parse '" + cell + "' as a finite real",
                          row);
    return v;
}

}  // namespace

Dataset load_csv(const std::string& path, const ColumnSpec& columns) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open file: " + path);

    // header = first non-empty, non-comment line ('#' lines carry metadata)
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        have_header = true;
        break;
    }
    if (!have_header) throw empty_data_error("file is empty: " + path);
    const std::vector<std::string> header = split_line(line);

    auto column_index = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw schema_error("column '" + name + "' not found in header of " + path);
        return static_cast<std::size_t>(it - header.begin());
    };

    const std::size_t ix = column_index(columns.x);
    const std::size_t iy = column_index(columns.y);
    std::vector<std::size_t> iz;
    iz.reserve(columns.z.size());
    for (const auto& name : columns.z) iz.push_back(column_index(name));

    Dataset out;
    out.d = columns.z.size();
    out.x_name = columns.x;
    out.y_name = columns.y;
    out.z_names = columns.z;

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        ++row;
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw parse_error("row " + std::to_string(row) + ": expected " +
                                  std::to_string(header.size()) + " fields, found " +
                                  std::to_string(cells.size()),
                              row);
        out.x.push_back(parse_cell(cells[ix], row, columns.x));
        out.y.push_back(parse_cell(cells[iy], row, columns.y));
        for (std::size_t j = 0; j < iz.size(); ++j)
            out.z.push_back(parse_cell(cells[iz[j]], row, columns.z[j]));
    }
    if (row == 0) throw empty_data_error("no data rows in " + path);
    out.n = row;
    out.validate();
    return out;
}

void save_csv(const Dataset& data, const std::string& path) {
    data.validate();
    std::ofstream out(path);
    if (!out) throw io_error("cannot write file: " + path);

    out << data.x_name << ',' << data.y_name;
    for (const auto& name : data.z_names) out << ',' << name;
    out << '\n';

    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    for (std::size_t i = 0; i < data.n; ++i) {
        put(data.x[i]);
        out << ',';
        put(data.y[i]);
        for (std::size_t j = 0; j < data.d; ++j) {
            out << ',';
            put(data.z_at(i, j));
        }
        out << '\n';
    }
    if (!out) throw io_error("failed writing " + path);
}

std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        // positions i..j (0-based) share the average of ranks i+1..j+1
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

Dataset to_pseudo_obs(const Dataset& data) {
    data.validate();
    if (data.transformed) throw domain_error("dataset is already transformed");

    const double denom = static_cast<double>(data.n) + 1.0;
    auto transform = [&](const std::vector<double>& column) {
        std::vector<double> out = average_ranks(column);
        for (double& v : out) v /= denom;
        return out;
    };

    Dataset out = data;
    out.x = transform(data.x);
    out.y = transform(data.y);
    for (std::size_t j = 0; j < data.d; ++j) {
        std::vector<double> column(data.n);
        for (std::size_t i = 0; i < data.n; ++i) column[i] = data.z_at(i, j);
        const std::vector<double> t = transform(column);
        for (std::size_t i = 0; i < data.n; ++i) out.z[i * data.d + j] = t[i];
    }
    out.transformed = true;
    return out;
}

}  // namespace pcci
