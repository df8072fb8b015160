#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdsim/matrix.hpp"

namespace sdsim {

struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateClusterError : std::runtime_error {
    explicit DegenerateClusterError(const std::string& msg) : std::runtime_error(msg) {}
};

// Blockwise vector quantization settings. Blocks tile the weight matrix; the
// sub-vectors inside each block carry codebook indices. Blocks in the same
// block-row share one codebook.
struct BvqConfig {
    int block_rows = 4;
    int block_cols = 8;
    int vector_len = 8;        // must divide block_rows * block_cols
    int codebook_entries = 16; // power of two
    double tau_initial = 2.0;
    double tau_final = 0.2;
    int refine_steps = 200;
    double learning_rate = 0.05;
    uint64_t seed = 1;

    void validate() const;
};

// Sub-vectors of one weight matrix grouped by block.
struct BlockPartition {
    int rows = 0;
    int cols = 0;
    int grid_rows = 0;  // rows / block_rows
    int grid_cols = 0;  // cols / block_cols
    int vectors_per_block = 0;
    // subvectors[b][v] is the v-th vector_len slice of block b (row-major
    // block order, row-major inside the block).
    std::vector<std::vector<std::vector<double>>> subvectors;
};

BlockPartition partition_blocks(const Mat& w, const BvqConfig& config);

// Learned model: one codebook per cluster (block-row), 4-bit entries with a
// per-codebook scale, one index per sub-vector.
struct BvqModel {
    BvqConfig config;
    int rows = 0;
    int cols = 0;
    // codebooks[c][e] = entry e of cluster c, vector_len int4 values.
    std::vector<std::vector<std::vector<int8_t>>> codebooks;
    std::vector<double> scales;           // one per codebook
    std::vector<std::vector<int>> indices;  // [block][subvector] -> entry id
    std::vector<int> cluster_of_block;     // block -> codebook id

    void validate() const;
};

BvqModel kmeans_init(const BlockPartition& blocks, const BvqConfig& config);

// Gumbel-softmax refinement with straight-through gradients. Keeps the best
// model seen, so the returned reconstruction MSE never exceeds the input's.
BvqModel gumbel_refine(const BvqModel& model, const Mat& w, const BvqConfig& config);

Mat reconstruct(const BvqModel& model);

double reconstruction_mse(const BvqModel& model, const Mat& w);

// Squared error of quantize_w4-style per-column 4-bit quantization, the
// baseline BVQ must beat.
double direct_int4_mse(const Mat& w);

struct CompressionReport {
    int64_t elements = 0;
    int64_t original_bits = 0;
    int64_t codebook_bits = 0;
    int64_t index_bits = 0;
    int64_t scale_bits = 0;
    double ratio = 0.0;
};

CompressionReport compression_report(const BvqModel& model, int original_bits_per_weight);

// Soft-assignment reconstruction loss and its analytic gradient, exposed so
// tests can check it against finite differences. `targets` holds the
// sub-vectors being fitted, `logits[v][e]` the per-sub-vector logits,
// `gumbel[v][e]` the (fixed) noise, `entries[e]` the effective codebook
// values (already scaled). Gradients are with respect to logits and entries.
struct SoftLossGrad {
    double loss = 0.0;
    std::vector<std::vector<double>> d_logits;
    std::vector<std::vector<double>> d_entries;
};

SoftLossGrad soft_assignment_loss(const std::vector<std::vector<double>>& targets,
                                  const std::vector<std::vector<double>>& logits,
                                  const std::vector<std::vector<double>>& gumbel,
                                  const std::vector<std::vector<double>>& entries,
                                  double tau);

// Synthetic training data: each block-row draws `num_prototypes` sub-vector
// prototypes at its own magnitude (alternating large/small across block-rows)
// and tiles them with additive noise. The magnitude contrast is what makes
// per-column scalar int4 struggle while per-cluster codebooks stay sharp.
Mat planted_prototype_weights(int rows, int cols, const BvqConfig& config, int num_prototypes,
                              double noise, uint64_t seed);

// Byte-exact binary serialization (see docs/formats.md).
std::vector<uint8_t> serialize_bvq(const BvqModel& model);
BvqModel deserialize_bvq(const std::vector<uint8_t>& bytes);

}  // namespace sdsim
