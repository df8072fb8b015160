#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sdsim/matrix.hpp"

namespace sdsim {

// Tiny decoder-only transformer with seeded random weights. It exists to be
// a deterministic stand-in for target/draft language models: forward passes
// use a fixed accumulation order so identical inputs give identical logits,
// and greedy argmax breaks ties toward the lowest token id.
class ToyLm {
public:
    ToyLm(uint64_t seed, int vocab, int dim, int layers, int heads, int max_context = 512);

    static ToyLm desk_default(uint64_t seed) { return ToyLm(seed, 256, 64, 4, 4, 512); }

    // A copy with epsilon * N(0,1) added to every weight. Small epsilon gives
    // a draft model that usually agrees with the base model.
    ToyLm perturbed(uint64_t seed, double epsilon) const;

    int vocab() const { return vocab_; }
    int dim() const { return dim_; }
    int layers() const { return layers_; }
    int heads() const { return heads_; }
    int max_context() const { return max_context_; }

    // Logits for every position, batch path (no cache). (len x vocab)
    Mat forward(const std::vector<int>& tokens) const;

    std::vector<int> greedy_decode(const std::vector<int>& prompt, int steps) const;

    // FNV-1a over the weight bit patterns; determinism checks.
    uint64_t weight_checksum() const;

    static int argmax_lowest(std::span<const double> logits);

private:
    friend class LmSession;

    struct Layer {
        Mat wq, wk, wv, wo;  // dim x dim
        Mat w1;              // dim x 4*dim
        Mat w2;              // 4*dim x dim
        std::vector<double> g1, g2;  // rms gains
    };

    void check_tokens(const std::vector<int>& tokens) const;

    int vocab_;
    int dim_;
    int layers_;
    int heads_;
    int max_context_;
    uint64_t seed_;
    Mat tok_embed_;  // vocab x dim
    Mat pos_embed_;  // max_context x dim
    std::vector<Layer> layers_v_;
    std::vector<double> g_final_;
    Mat head_;  // dim x vocab
};

// Incremental decode state: cached per-layer keys/values and per-position
// logits. Extending by one token reproduces exactly the floats the batch
// forward computes for that position, so cached and uncached paths agree
// bit for bit.
class LmSession {
public:
    explicit LmSession(const ToyLm& lm);

    void reset(const std::vector<int>& tokens);
    void extend(std::span<const int> tokens);
    void truncate(size_t len);

    size_t size() const { return tokens_.size(); }
    const std::vector<int>& tokens() const { return tokens_; }
    const std::vector<double>& logits(size_t pos) const { return logits_[pos]; }
    int greedy_at(size_t pos) const {
        return ToyLm::argmax_lowest(std::span<const double>(logits_[pos]));
    }

private:
    void append_token(int token);

    const ToyLm* lm_;
    std::vector<int> tokens_;
    // keys_[layer][pos], values_[layer][pos]
    std::vector<std::vector<std::vector<double>>> keys_;
    std::vector<std::vector<std::vector<double>>> values_;
    std::vector<std::vector<double>> logits_;
};

}  // namespace sdsim
