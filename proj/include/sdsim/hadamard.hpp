#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sdsim/errors.hpp"

namespace sdsim {

struct UnsupportedOrderError : std::runtime_error {
    explicit UnsupportedOrderError(const std::string& msg) : std::runtime_error(msg) {}
};

// Exact {+1,-1} square matrix satisfying H * H^T = order * I in integer
// arithmetic. Orders are 1, 2, or multiples of 4.
class HadamardMatrix {
public:
    HadamardMatrix() = default;
    HadamardMatrix(int order, std::vector<int8_t> entries);

    int order() const { return order_; }
    int8_t at(int r, int c) const { return entries_[static_cast<size_t>(r) * order_ + c]; }

    // H * H^T == order * I, checked exactly with 64-bit accumulators.
    bool is_orthogonal() const;

    // Test hook: flip one sign so the orthogonality check fails.
    void corrupt_entry(int r, int c);

private:
    int order_ = 0;
    std::vector<int8_t> entries_;
};

// Side table of matrices loaded from text files, keyed by order.
class HadamardRegistry {
public:
    // File format: line 1 is the order N, then N lines of N characters each
    // from {+,-}. Anything else is rejected.
    void load_file(const std::string& path);
    void add(HadamardMatrix h);

    const HadamardMatrix* find(int order) const;
    std::vector<int> orders() const;

private:
    std::map<int, HadamardMatrix> by_order_;
};

// H(2^k) = H(2) (x) H(2^(k-1)), H(1) = [1]. k <= 16.
HadamardMatrix construct_sylvester(int k);

// Non-power-of-two orders. Built from Paley constructions (type I for prime
// q = m-1 with q % 4 == 3, type II for prime q = m/2-1 with q % 4 == 1),
// recursive doubling H(m) = H(2) (x) H(m/2), or a registry entry.
HadamardMatrix construct_npt(int m, const HadamardRegistry* registry = nullptr);

// Orders construct_npt can produce up to `limit`, plus registry orders.
std::vector<int> supported_npt_orders(int limit, const HadamardRegistry* registry = nullptr);

// Unnormalized in-place butterfly; x.size() must be a power of two.
void fwht_inplace(std::span<double> x);

// Unnormalized H(2^k) * x via k butterfly stages.
std::vector<double> fwht(const std::vector<double>& x, int k);

// H * x using only additions/subtractions. The accumulator type is a template
// parameter so tests can instantiate it with an operation-counting type and
// assert the multiply count is zero.
template <typename T>
std::vector<T> apply_npt_generic(std::span<const T> x, const HadamardMatrix& h) {
    if (static_cast<int>(x.size()) != h.order()) {
        throw ShapeError("apply_npt: vector length " + std::to_string(x.size()) +
                         " != matrix order " + std::to_string(h.order()));
    }
    int n = h.order();
    std::vector<T> y(static_cast<size_t>(n));
    for (int r = 0; r < n; ++r) {
        T acc{};
        for (int c = 0; c < n; ++c) {
            if (h.at(r, c) > 0) {
                acc += x[c];
            } else {
                acc -= x[c];
            }
        }
        y[r] = acc;
    }
    return y;
}

std::vector<double> apply_npt(std::span<const double> x, const HadamardMatrix& h);

}  // namespace sdsim
