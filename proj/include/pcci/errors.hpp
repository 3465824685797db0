#pragma once

#include <stdexcept>
#include <string>

namespace pcci {

// Input-shape and validation failures (bad dimensions, bad quantile levels, ...).
class domain_error : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class shape_error : public domain_error {
  public:
    using domain_error::domain_error;
};

// CSV schema problems: a designated column is missing from the header.
class schema_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A cell failed to parse as a finite real.
class parse_error : public std::runtime_error {
  public:
    parse_error(const std::string& msg, std::size_t row) : std::runtime_error(msg), row_(row) {}
    std::size_t row() const { return row_; }

  private:
    std::size_t row_;
};

class empty_data_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Numerically degenerate input: zero design column, singular covariance, ...
class degeneracy_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class io_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace pcci
