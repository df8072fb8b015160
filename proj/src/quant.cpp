#include "sdsim/quant.hpp"

#include <cmath>

namespace sdsim {

namespace {

// Round half to even, the hardware-friendly default.
double round_even(double v) { return std::nearbyint(v); }

int8_t quant_value(double v, double scale, int lo, int hi) {
    double q = round_even(v / scale);
    if (q < lo) q = lo;
    if (q > hi) q = hi;
    return static_cast<int8_t>(q);
}

void check_finite(const Mat& m, const char* who) {
    for (double v : m.a) {
        if (!std::isfinite(v)) {
            throw ValueError(std::string(who) + ": input contains a non-finite value");
        }
    }
}

}  // namespace

QuantizedTensor quantize_act_int8(const Mat& x) {
    check_finite(x, "quantize_act_int8");
    QuantizedTensor q;
    q.rows = x.rows;
    q.cols = x.cols;
    q.bit_width = 8;
    q.per_row = true;
    q.data.resize(x.a.size());
    q.scales.resize(x.rows);
    for (int r = 0; r < x.rows; ++r) {
        double max_abs = 0.0;
        for (int c = 0; c < x.cols; ++c) max_abs = std::max(max_abs, std::abs(x.at(r, c)));
        double scale = max_abs > 0.0 ? max_abs / 127.0 : 1.0;
        q.scales[r] = scale;
        for (int c = 0; c < x.cols; ++c) {
            q.data[static_cast<size_t>(r) * x.cols + c] = quant_value(x.at(r, c), scale, -128, 127);
        }
    }
    return q;
}

QuantizedTensor quantize_w4(const Mat& w) {
    check_finite(w, "quantize_w4");
    QuantizedTensor q;
    q.rows = w.rows;
    q.cols = w.cols;
    q.bit_width = 4;
    q.per_row = false;
    q.data.resize(w.a.size());
    q.scales.resize(w.cols);
    for (int c = 0; c < w.cols; ++c) {
        double max_abs = 0.0;
        for (int r = 0; r < w.rows; ++r) max_abs = std::max(max_abs, std::abs(w.at(r, c)));
        double scale = max_abs > 0.0 ? max_abs / 7.0 : 1.0;
        q.scales[c] = scale;
        for (int r = 0; r < w.rows; ++r) {
            q.data[static_cast<size_t>(r) * w.cols + c] = quant_value(w.at(r, c), scale, -8, 7);
        }
    }
    return q;
}

W4A8ErrorReport w4a8_matmul_error(const std::vector<double>& x, const Mat& w,
                                  const RotationPlan* plan, const HadamardRegistry* registry) {
    if (static_cast<int>(x.size()) != w.rows) {
        throw ShapeError("w4a8_matmul_error: vector length " + std::to_string(x.size()) +
                         " != weight rows " + std::to_string(w.rows));
    }
    auto exact = vec_mat(x, w);

    std::vector<double> xq_src = x;
    const Mat* wq_src = &w;
    Mat folded;
    if (plan != nullptr) {
        xq_src = rotate_activation(x, *plan, registry);
        folded = fold_weights(w, *plan, registry);
        wq_src = &folded;
    }

    Mat xrow(1, static_cast<int>(xq_src.size()));
    xrow.a = xq_src;
    QuantizedTensor qa = quantize_act_int8(xrow);
    QuantizedTensor qw = quantize_w4(*wq_src);

    // Integer GEMM with the scale product applied once per output.
    W4A8ErrorReport rep;
    rep.rotated = plan != nullptr;
    double err = 0.0, ref = 0.0;
    for (int j = 0; j < w.cols; ++j) {
        int64_t acc = 0;
        for (int i = 0; i < wq_src->rows; ++i) {
            acc += static_cast<int64_t>(qa.at(0, i)) * qw.at(i, j);
        }
        double approx = static_cast<double>(acc) * qa.scales[0] * qw.scales[j];
        err += (approx - exact[j]) * (approx - exact[j]);
        ref += exact[j] * exact[j];
    }
    rep.exact_norm = std::sqrt(ref);
    rep.error_norm = std::sqrt(err);
    rep.relative_l2 = ref > 0.0 ? rep.error_norm / rep.exact_norm : 0.0;
    return rep;
}

}  // namespace sdsim
