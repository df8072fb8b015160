#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sdsim/errors.hpp"

namespace sdsim {

// Minimal row-major dense matrix of doubles. All model math in this project
// is desk scale, so plain loops with a fixed accumulation order are preferred
// over a BLAS: reproducibility matters more than throughput here.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

// y[j] = sum_i x[i] * W[i][j], accumulated in index order.
inline std::vector<double> vec_mat(const std::vector<double>& x, const Mat& w) {
    if (static_cast<int>(x.size()) != w.rows) {
        throw ShapeError("vec_mat: vector length " + std::to_string(x.size()) +
                         " != matrix rows " + std::to_string(w.rows));
    }
    std::vector<double> y(w.cols, 0.0);
    for (int i = 0; i < w.rows; ++i) {
        double xi = x[i];
        for (int j = 0; j < w.cols; ++j) {
            y[j] += xi * w.at(i, j);
        }
    }
    return y;
}

inline double norm2(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

}  // namespace sdsim
