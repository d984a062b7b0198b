#ifndef ONCUE_MATRIX_HPP
#define ONCUE_MATRIX_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "oncue/errors.hpp"

namespace oncue {

// Dense row-major matrix of doubles. Deliberately minimal: the numeric paths
// in this library spell out their loops so floating-point evaluation order is
// pinned down, which the bitwise carried-state contract depends on.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    bool same_shape(const Matrix& o) const {
        return rows == o.rows && cols == o.cols;
    }

    // Exact (bitwise on values) equality; shape included.
    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
    }

    bool is_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void require_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                          const char* what) {
    if (m.rows != rows || m.cols != cols)
        throw ShapeError(std::string(what) + ": expected " +
                         std::to_string(rows) + "x" + std::to_string(cols) +
                         ", got " + std::to_string(m.rows) + "x" +
                         std::to_string(m.cols));
}

}  // namespace oncue

#endif  // ONCUE_MATRIX_HPP
