#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sdsim/matrix.hpp"
#include "sdsim/rotation.hpp"

namespace sdsim {

// Symmetric integer tensor with one positive scale per group. Activations
// group per token (row), weights per output channel (column). Zero point is
// always 0; an all-zero group gets scale 1.
struct QuantizedTensor {
    std::vector<int8_t> data;  // row-major, same shape as the source
    int rows = 0;
    int cols = 0;
    int bit_width = 8;          // 4 or 8
    bool per_row = true;        // true: one scale per row; false: per column
    std::vector<double> scales;

    int8_t at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    double dequant(int r, int c) const {
        return static_cast<double>(at(r, c)) * scales[per_row ? r : c];
    }
};

// Per-token symmetric INT8: scale = max|row| / 127, round to nearest even.
QuantizedTensor quantize_act_int8(const Mat& x);

// Per-output-channel symmetric INT4: scale = max|col| / 7, clamp to [-8, 7].
QuantizedTensor quantize_w4(const Mat& w);

struct W4A8ErrorReport {
    double exact_norm = 0.0;
    double error_norm = 0.0;
    double relative_l2 = 0.0;  // 0 when the exact result is zero
    bool rotated = false;
};

// Relative L2 error of the W4A8 GEMM against the exact double GEMM. When a
// plan is given the activation is rotated and the inverse rotation is folded
// into the weights before quantization.
W4A8ErrorReport w4a8_matmul_error(const std::vector<double>& x, const Mat& w,
                                  const RotationPlan* plan = nullptr,
                                  const HadamardRegistry* registry = nullptr);

}  // namespace sdsim
