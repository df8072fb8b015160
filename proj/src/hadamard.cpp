#include "sdsim/hadamard.hpp"

#include <cstdint>
#include <fstream>

namespace sdsim {

HadamardMatrix::HadamardMatrix(int order, std::vector<int8_t> entries)
    : order_(order), entries_(std::move(entries)) {
    if (order_ <= 0 || entries_.size() != static_cast<size_t>(order_) * order_) {
        throw SizeError("HadamardMatrix: entry count does not match order " +
                        std::to_string(order_));
    }
    for (int8_t e : entries_) {
        if (e != 1 && e != -1) {
            throw ValueError("HadamardMatrix: entries must be +1 or -1");
        }
    }
}

bool HadamardMatrix::is_orthogonal() const {
    // order <= 2^16 keeps every dot product within int64 range.
    for (int r = 0; r < order_; ++r) {
        for (int s = r; s < order_; ++s) {
            int64_t dot = 0;
            for (int c = 0; c < order_; ++c) {
                dot += static_cast<int64_t>(at(r, c)) * at(s, c);
            }
            int64_t want = (r == s) ? order_ : 0;
            if (dot != want) return false;
        }
    }
    return true;
}

void HadamardMatrix::corrupt_entry(int r, int c) {
    entries_[static_cast<size_t>(r) * order_ + c] =
        static_cast<int8_t>(-entries_[static_cast<size_t>(r) * order_ + c]);
}

void HadamardRegistry::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open Hadamard matrix file: " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ValueError(path + ": missing order line");
    }
    int order = 0;
    try {
        size_t pos = 0;
        order = std::stoi(line, &pos);
        if (pos != line.size()) throw std::invalid_argument("trailing chars");
    } catch (const std::exception&) {
        throw ValueError(path + ": line 1 must be the matrix order, got '" + line + "'");
    }
    if (order <= 0) {
        throw ValueError(path + ": order must be positive");
    }
    std::vector<int8_t> entries;
    entries.reserve(static_cast<size_t>(order) * order);
    for (int r = 0; r < order; ++r) {
        if (!std::getline(in, line)) {
            throw ValueError(path + ": expected " + std::to_string(order) +
                             " matrix rows, got " + std::to_string(r));
        }
        if (static_cast<int>(line.size()) != order) {
            throw ValueError(path + ": row " + std::to_string(r + 1) + " has " +
                             std::to_string(line.size()) + " characters, expected " +
                             std::to_string(order));
        }
        for (char ch : line) {
            if (ch == '+') {
                entries.push_back(1);
            } else if (ch == '-') {
                entries.push_back(-1);
            } else {
                throw ValueError(path + ": row " + std::to_string(r + 1) +
                                 " contains '" + std::string(1, ch) + "', only +/- allowed");
            }
        }
    }
    if (std::getline(in, line) && !line.empty()) {
        throw ValueError(path + ": unexpected content after row " + std::to_string(order));
    }
    HadamardMatrix h(order, std::move(entries));
    if (!h.is_orthogonal()) {
        throw ValueError(path + ": matrix fails the H*H^T = n*I check");
    }
    by_order_[order] = std::move(h);
}

void HadamardRegistry::add(HadamardMatrix h) {
    if (!h.is_orthogonal()) {
        throw ValueError("registry add: matrix fails the H*H^T = n*I check");
    }
    by_order_[h.order()] = std::move(h);
}

const HadamardMatrix* HadamardRegistry::find(int order) const {
    auto it = by_order_.find(order);
    return it == by_order_.end() ? nullptr : &it->second;
}

std::vector<int> HadamardRegistry::orders() const {
    std::vector<int> out;
    out.reserve(by_order_.size());
    for (const auto& [k, v] : by_order_) out.push_back(k);
    return out;
}

HadamardMatrix construct_sylvester(int k) {
    if (k < 0 || k > 16) {
        throw SizeError("construct_sylvester: k must be in [0, 16], got " + std::to_string(k));
    }
    int n = 1 << k;
    std::vector<int8_t> e(static_cast<size_t>(n) * n, 1);
    // H[r][c] = (-1)^popcount(r & c), the closed form of the Kronecker recursion.
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            int bits = __builtin_popcount(static_cast<unsigned>(r & c));
            e[static_cast<size_t>(r) * n + c] = (bits & 1) ? -1 : 1;
        }
    }
    return HadamardMatrix(n, std::move(e));
}

namespace {

bool is_prime(int n) {
    if (n < 2) return false;
    for (int d = 2; static_cast<int64_t>(d) * d <= n; ++d) {
        if (n % d == 0) return false;
    }
    return true;
}

// Legendre symbol via Euler's criterion, q an odd prime.
int legendre(int a, int q) {
    a %= q;
    if (a < 0) a += q;
    if (a == 0) return 0;
    int64_t result = 1, base = a, exp = (q - 1) / 2;
    while (exp > 0) {
        if (exp & 1) result = result * base % q;
        base = base * base % q;
        exp >>= 1;
    }
    return result == 1 ? 1 : -1;
}

// Skew Paley construction, order q+1 for prime q with q % 4 == 3.
HadamardMatrix paley_one(int q) {
    int n = q + 1;
    std::vector<int8_t> e(static_cast<size_t>(n) * n);
    auto set = [&](int r, int c, int v) { e[static_cast<size_t>(r) * n + c] = static_cast<int8_t>(v); };
    set(0, 0, 1);
    for (int j = 1; j < n; ++j) set(0, j, 1);
    for (int i = 1; i < n; ++i) set(i, 0, -1);
    for (int i = 1; i < n; ++i) {
        for (int j = 1; j < n; ++j) {
            set(i, j, i == j ? 1 : legendre(j - i, q));
        }
    }
    return HadamardMatrix(n, std::move(e));
}

// Symmetric Paley construction, order 2(q+1) for prime q with q % 4 == 1.
HadamardMatrix paley_two(int q) {
    int m = q + 1;
    int n = 2 * m;
    // Conference matrix C: zero diagonal, border of ones, Jacobsthal core.
    std::vector<int> c(static_cast<size_t>(m) * m, 0);
    for (int j = 1; j < m; ++j) {
        c[j] = 1;
        c[static_cast<size_t>(j) * m] = 1;
    }
    for (int i = 1; i < m; ++i) {
        for (int j = 1; j < m; ++j) {
            if (i != j) c[static_cast<size_t>(i) * m + j] = legendre(j - i, q);
        }
    }
    std::vector<int8_t> e(static_cast<size_t>(n) * n);
    auto put_block = [&](int bi, int bj, int a00, int a01, int a10, int a11) {
        e[static_cast<size_t>(2 * bi) * n + 2 * bj] = static_cast<int8_t>(a00);
        e[static_cast<size_t>(2 * bi) * n + 2 * bj + 1] = static_cast<int8_t>(a01);
        e[static_cast<size_t>(2 * bi + 1) * n + 2 * bj] = static_cast<int8_t>(a10);
        e[static_cast<size_t>(2 * bi + 1) * n + 2 * bj + 1] = static_cast<int8_t>(a11);
    };
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            int cij = c[static_cast<size_t>(i) * m + j];
            if (i == j) {
                put_block(i, j, 1, -1, -1, -1);
            } else if (cij == 1) {
                put_block(i, j, 1, 1, 1, -1);
            } else {
                put_block(i, j, -1, -1, -1, 1);
            }
        }
    }
    return HadamardMatrix(n, std::move(e));
}

bool npt_constructible(int m) {
    if (m == 1 || m == 2) return true;
    if (m % 4 != 0) return false;
    if (is_prime(m - 1) && (m - 1) % 4 == 3) return true;
    if (m % 2 == 0 && is_prime(m / 2 - 1) && (m / 2 - 1) % 4 == 1) return true;
    if (m % 2 == 0 && npt_constructible(m / 2)) return true;
    return false;
}

}  // namespace

HadamardMatrix construct_npt(int m, const HadamardRegistry* registry) {
    if (m <= 0) {
        throw UnsupportedOrderError("construct_npt: order must be positive, got " +
                                    std::to_string(m));
    }
    if (m == 1) return HadamardMatrix(1, {1});
    if (m == 2) return construct_sylvester(1);
    if (registry != nullptr) {
        if (const HadamardMatrix* h = registry->find(m)) return *h;
    }
    if (m % 4 == 0) {
        if (is_prime(m - 1) && (m - 1) % 4 == 3) return paley_one(m - 1);
        if (is_prime(m / 2 - 1) && (m / 2 - 1) % 4 == 1) return paley_two(m / 2 - 1);
        if (npt_constructible(m / 2) ||
            (registry != nullptr && registry->find(m / 2) != nullptr)) {
            HadamardMatrix half = construct_npt(m / 2, registry);
            int n = m;
            int hn = half.order();
            std::vector<int8_t> e(static_cast<size_t>(n) * n);
            // H(2) (x) half
            for (int r = 0; r < n; ++r) {
                for (int c = 0; c < n; ++c) {
                    int sign = (r >= hn && c >= hn) ? -1 : 1;
                    e[static_cast<size_t>(r) * n + c] =
                        static_cast<int8_t>(sign * half.at(r % hn, c % hn));
                }
            }
            return HadamardMatrix(n, std::move(e));
        }
    }
    std::string supported;
    for (int o : supported_npt_orders(64, registry)) {
        if (!supported.empty()) supported += ", ";
        supported += std::to_string(o);
    }
    throw UnsupportedOrderError("construct_npt: no construction for order " + std::to_string(m) +
                                "; supported orders up to 64: {" + supported +
                                "}; larger orders can be loaded from a matrix file");
}

std::vector<int> supported_npt_orders(int limit, const HadamardRegistry* registry) {
    std::vector<int> out;
    for (int m = 1; m <= limit; ++m) {
        bool ok = npt_constructible(m) || (registry != nullptr && registry->find(m) != nullptr);
        if (ok) out.push_back(m);
    }
    if (registry != nullptr) {
        for (int o : registry->orders()) {
            if (o > limit) out.push_back(o);
        }
    }
    return out;
}

void fwht_inplace(std::span<double> x) {
    size_t n = x.size();
    if (n == 0 || (n & (n - 1)) != 0) {
        throw ShapeError("fwht: length must be a power of two, got " + std::to_string(n));
    }
    for (size_t h = 1; h < n; h *= 2) {
        for (size_t i = 0; i < n; i += 2 * h) {
            for (size_t j = i; j < i + h; ++j) {
                double u = x[j];
                double v = x[j + h];
                x[j] = u + v;
                x[j + h] = u - v;
            }
        }
    }
}

std::vector<double> fwht(const std::vector<double>& x, int k) {
    if (k < 0 || k > 30 || x.size() != (static_cast<size_t>(1) << k)) {
        throw ShapeError("fwht: expected length 2^" + std::to_string(k) + ", got " +
                         std::to_string(x.size()));
    }
    std::vector<double> y = x;
    fwht_inplace(y);
    return y;
}

std::vector<double> apply_npt(std::span<const double> x, const HadamardMatrix& h) {
    return apply_npt_generic<double>(x, h);
}

}  // namespace sdsim
