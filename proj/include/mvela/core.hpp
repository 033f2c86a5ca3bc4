#ifndef MVELA_CORE_HPP
#define MVELA_CORE_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mvela {

// Row-major so that a row can be handed out as a contiguous span.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::span<const double> row_span(const Matrix& m, Eigen::Index r)
{
    return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

inline std::span<double> row_span(Matrix& m, Eigen::Index r)
{
    return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

inline std::vector<double> column_copy(const Matrix& m, Eigen::Index c)
{
    std::vector<double> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        out[static_cast<std::size_t>(r)] = m(r, c);
    }
    return out;
}

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Value outside the box constraints of a variable.
class DomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Empty, non-finite or misaligned input data.
class DataError : public Error {
public:
    using Error::Error;
};

// Request exceeds what an algorithm is willing to do (e.g. exact enumeration size).
class CapabilityError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

} // namespace mvela

#endif
