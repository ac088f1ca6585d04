#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "cuerank/error.hpp"

namespace cuerank {

// Row-major dense matrix of doubles. The storage type used for model
// parameters and file I/O; heavy math maps this into Eigen internally.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values; // row-major, rows * cols entries

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), values(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void validate(const char* what) const {
        if (values.size() != rows * cols)
            raise(ErrorCode::invalid_argument,
                  std::string(what) + ": value count does not match rows x cols");
        if (!all_finite())
            raise(ErrorCode::invalid_argument,
                  std::string(what) + ": non-finite entries");
    }
};

} // namespace cuerank
