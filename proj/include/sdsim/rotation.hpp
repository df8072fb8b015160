#pragma once

#include <string>
#include <vector>

#include "sdsim/hadamard.hpp"
#include "sdsim/matrix.hpp"

namespace sdsim {

struct InfeasiblePlanError : std::runtime_error {
    explicit InfeasiblePlanError(const std::string& msg) : std::runtime_error(msg) {}
};

// One local rotation of size m * 2^k applied at `offset` within the n-vector.
struct RotationSegment {
    int offset = 0;
    int m = 1;  // non-power-of-two Hadamard order
    int k = 0;  // butterfly depth
    int size() const { return m << k; }
    bool operator==(const RotationSegment&) const = default;
};

// Two overlapped segment rotations whose union covers [0, n). The upper
// segment starts at 0, the lower segment ends at n. When a single segment
// covers n exactly the plan is degenerate (lower == upper) and only one
// stage is applied.
struct RotationPlan {
    int n = 0;
    int depth_cap = 6;
    RotationSegment upper;
    RotationSegment lower;
    bool single_segment = false;

    int overlap() const {
        return single_segment ? 0 : upper.size() + lower.size() - n;
    }
    std::string to_string() const;
};

// Finds the plan minimizing, in order: overlap, segment count (an exact
// single-segment cover beats any pair), total arithmetic cost
// sum(size * (k + m)), then lexicographic (upper.m, upper.k, lower.m,
// lower.k). Throws InfeasiblePlanError when no combination covers n.
RotationPlan search_plan(int n, int depth_cap, const std::vector<int>& available_orders,
                         const HadamardRegistry* registry = nullptr);

// Orthonormal rotation of one segment: reshape x as m rows by 2^k columns
// (row r, column c holds x[r * 2^k + c]), butterfly each row, add/sub
// Hadamard each column, scale by 1/sqrt(size). Equivalent to
// (H_m (x) H_{2^k}) / sqrt(size) applied to x.
std::vector<double> segment_rotation_apply(const std::vector<double>& x,
                                           const RotationSegment& seg,
                                           const HadamardMatrix& h_m);

// Stage 1 rotates the upper range, stage 2 the lower range of the stage-1
// result. Preserves the Euclidean norm.
std::vector<double> rotate_activation(const std::vector<double>& x, const RotationPlan& plan,
                                      const HadamardRegistry* registry = nullptr);

// Applies the same composite rotation to every column of W so that
// rotate_activation(x) . fold_weights(W) == x . W.
Mat fold_weights(const Mat& w, const RotationPlan& plan,
                 const HadamardRegistry* registry = nullptr);

}  // namespace sdsim
