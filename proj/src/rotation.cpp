#include "sdsim/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <tuple>

namespace sdsim {

std::string RotationPlan::to_string() const {
    auto seg = [](const char* name, const RotationSegment& s) {
        return std::string(name) + " offset=" + std::to_string(s.offset) +
               " m=" + std::to_string(s.m) + " k=" + std::to_string(s.k);
    };
    std::string out = "plan n=" + std::to_string(n) + " depth_cap=" + std::to_string(depth_cap);
    out += " " + seg("upper", upper);
    if (!single_segment) {
        out += " " + seg("lower", lower);
    }
    return out;
}

namespace {

struct Candidate {
    int m;
    int k;
    int size;
};

int64_t segment_cost(const Candidate& c) {
    return static_cast<int64_t>(c.size) * (c.k + c.m);
}

}  // namespace

RotationPlan search_plan(int n, int depth_cap, const std::vector<int>& available_orders,
                         const HadamardRegistry* registry) {
    if (n < 1) {
        throw InfeasiblePlanError("search_plan: n must be >= 1, got " + std::to_string(n));
    }
    if (depth_cap < 0) {
        throw InfeasiblePlanError("search_plan: depth_cap must be >= 0");
    }
    std::vector<int> orders = available_orders;
    std::sort(orders.begin(), orders.end());
    orders.erase(std::unique(orders.begin(), orders.end()), orders.end());
    for (int m : orders) {
        construct_npt(m, registry);  // throws UnsupportedOrderError for unknown orders
    }

    std::vector<Candidate> sizes;
    for (int m : orders) {
        for (int k = 0; k <= depth_cap; ++k) {
            int64_t s = static_cast<int64_t>(m) << k;
            if (s > n) break;
            sizes.push_back({m, k, static_cast<int>(s)});
        }
    }

    bool found = false;
    RotationPlan best;
    // Ranking key: overlap, then single-over-pair, then cost, then
    // (upper.m, upper.k, lower.m, lower.k).
    std::tuple<int, int, int64_t, int, int, int, int> best_key;

    auto consider = [&](const RotationPlan& p, const std::tuple<int, int, int64_t, int, int, int, int>& key) {
        if (!found || key < best_key) {
            found = true;
            best = p;
            best_key = key;
        }
    };

    for (const Candidate& c : sizes) {
        if (c.size != n) continue;
        RotationPlan p;
        p.n = n;
        p.depth_cap = depth_cap;
        p.upper = {0, c.m, c.k};
        p.lower = p.upper;
        p.single_segment = true;
        consider(p, {0, 0, segment_cost(c), c.m, c.k, c.m, c.k});
    }
    for (const Candidate& u : sizes) {
        for (const Candidate& l : sizes) {
            if (u.size + l.size < n) continue;
            RotationPlan p;
            p.n = n;
            p.depth_cap = depth_cap;
            p.upper = {0, u.m, u.k};
            p.lower = {n - l.size, l.m, l.k};
            p.single_segment = false;
            int overlap = u.size + l.size - n;
            consider(p, {overlap, 1, segment_cost(u) + segment_cost(l), u.m, u.k, l.m, l.k});
        }
    }

    if (!found) {
        std::string set;
        for (int m : orders) {
            if (!set.empty()) set += ", ";
            set += std::to_string(m);
        }
        throw InfeasiblePlanError("search_plan: no (m, k) decomposition covers n=" +
                                  std::to_string(n) + " with orders {" + set +
                                  "} and depth_cap=" + std::to_string(depth_cap));
    }
    return best;
}

std::vector<double> segment_rotation_apply(const std::vector<double>& x,
                                           const RotationSegment& seg,
                                           const HadamardMatrix& h_m) {
    int size = seg.size();
    if (static_cast<int>(x.size()) != size) {
        throw ShapeError("segment_rotation_apply: vector length " + std::to_string(x.size()) +
                         " != segment size " + std::to_string(size));
    }
    if (h_m.order() != seg.m) {
        throw ShapeError("segment_rotation_apply: matrix order " + std::to_string(h_m.order()) +
                         " != segment m " + std::to_string(seg.m));
    }
    int cols = 1 << seg.k;
    std::vector<double> work = x;
    // Butterfly along each row of the m x 2^k view.
    for (int r = 0; r < seg.m; ++r) {
        fwht_inplace(std::span<double>(work.data() + static_cast<size_t>(r) * cols, cols));
    }
    // Add/sub Hadamard along each column.
    std::vector<double> col(seg.m);
    std::vector<double> out(static_cast<size_t>(size));
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < seg.m; ++r) col[r] = work[static_cast<size_t>(r) * cols + c];
        auto rotated = apply_npt(std::span<const double>(col), h_m);
        for (int r = 0; r < seg.m; ++r) out[static_cast<size_t>(r) * cols + c] = rotated[r];
    }
    double inv_norm = 1.0 / std::sqrt(static_cast<double>(size));
    for (double& v : out) v *= inv_norm;
    return out;
}

namespace {

void apply_segment_in_place(std::vector<double>& x, const RotationSegment& seg,
                            const HadamardMatrix& h_m) {
    std::vector<double> slice(x.begin() + seg.offset, x.begin() + seg.offset + seg.size());
    auto rotated = segment_rotation_apply(slice, seg, h_m);
    std::copy(rotated.begin(), rotated.end(), x.begin() + seg.offset);
}

}  // namespace

std::vector<double> rotate_activation(const std::vector<double>& x, const RotationPlan& plan,
                                      const HadamardRegistry* registry) {
    if (static_cast<int>(x.size()) != plan.n) {
        throw ShapeError("rotate_activation: vector length " + std::to_string(x.size()) +
                         " != plan n " + std::to_string(plan.n));
    }
    HadamardMatrix h_upper = construct_npt(plan.upper.m, registry);
    std::vector<double> out = x;
    apply_segment_in_place(out, plan.upper, h_upper);
    if (!plan.single_segment) {
        HadamardMatrix h_lower =
            plan.lower.m == plan.upper.m ? h_upper : construct_npt(plan.lower.m, registry);
        apply_segment_in_place(out, plan.lower, h_lower);
    }
    return out;
}

Mat fold_weights(const Mat& w, const RotationPlan& plan, const HadamardRegistry* registry) {
    if (w.rows != plan.n) {
        throw ShapeError("fold_weights: weight rows " + std::to_string(w.rows) +
                         " != plan n " + std::to_string(plan.n));
    }
    HadamardMatrix h_upper = construct_npt(plan.upper.m, registry);
    HadamardMatrix h_lower =
        plan.lower.m == plan.upper.m ? h_upper : construct_npt(plan.lower.m, registry);
    Mat out(w.rows, w.cols);
    std::vector<double> col(static_cast<size_t>(w.rows));
    for (int c = 0; c < w.cols; ++c) {
        for (int r = 0; r < w.rows; ++r) col[r] = w.at(r, c);
        apply_segment_in_place(col, plan.upper, h_upper);
        if (!plan.single_segment) {
            apply_segment_in_place(col, plan.lower, h_lower);
        }
        for (int r = 0; r < w.rows; ++r) out.at(r, c) = col[r];
    }
    return out;
}

}  // namespace sdsim
