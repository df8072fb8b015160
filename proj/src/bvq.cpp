#include "sdsim/bvq.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "sdsim/quant.hpp"
#include "sdsim/rng.hpp"

namespace sdsim {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

int index_bit_width(int codebook_entries) {
    int bits = 0;
    while ((1 << bits) < codebook_entries) ++bits;
    return bits;
}

double round_even(double v) { return std::nearbyint(v); }

// Scales are stored as float32 in the serialized form; keeping them at
// float32 precision in the model makes serialization lossless.
double as_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

int8_t quant4(double v, double scale) {
    double q = round_even(v / scale);
    if (q < -8) q = -8;
    if (q > 7) q = 7;
    return static_cast<int8_t>(q);
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace

void BvqConfig::validate() const {
    if (block_rows <= 0 || block_cols <= 0) {
        throw ConfigError("bvq: block shape must be positive");
    }
    if (vector_len <= 0 || (block_rows * block_cols) % vector_len != 0) {
        throw ConfigError("bvq: vector_len " + std::to_string(vector_len) +
                          " must divide block size " + std::to_string(block_rows * block_cols));
    }
    if (!is_power_of_two(codebook_entries)) {
        throw ConfigError("bvq: codebook_entries must be a power of two, got " +
                          std::to_string(codebook_entries));
    }
    if (tau_initial <= 0 || tau_final <= 0 || refine_steps < 0 || learning_rate <= 0) {
        throw ConfigError("bvq: temperature schedule and learning rate must be positive");
    }
}

void BvqModel::validate() const {
    int c = config.codebook_entries;
    for (const auto& cb : codebooks) {
        if (static_cast<int>(cb.size()) != c) {
            throw ValueError("bvq model: codebook entry count mismatch");
        }
        for (const auto& entry : cb) {
            for (int8_t v : entry) {
                if (v < -8 || v > 7) throw ValueError("bvq model: entry outside int4 range");
            }
        }
    }
    for (const auto& block : indices) {
        for (int idx : block) {
            if (idx < 0 || idx >= c) throw ValueError("bvq model: index out of range");
        }
    }
}

BlockPartition partition_blocks(const Mat& w, const BvqConfig& config) {
    config.validate();
    if (w.rows % config.block_rows != 0) {
        throw ConfigError("bvq: matrix rows " + std::to_string(w.rows) +
                          " not divisible by block_rows " + std::to_string(config.block_rows));
    }
    if (w.cols % config.block_cols != 0) {
        throw ConfigError("bvq: matrix cols " + std::to_string(w.cols) +
                          " not divisible by block_cols " + std::to_string(config.block_cols));
    }
    BlockPartition part;
    part.rows = w.rows;
    part.cols = w.cols;
    part.grid_rows = w.rows / config.block_rows;
    part.grid_cols = w.cols / config.block_cols;
    part.vectors_per_block = config.block_rows * config.block_cols / config.vector_len;
    part.subvectors.resize(static_cast<size_t>(part.grid_rows) * part.grid_cols);
    for (int gr = 0; gr < part.grid_rows; ++gr) {
        for (int gc = 0; gc < part.grid_cols; ++gc) {
            auto& block = part.subvectors[static_cast<size_t>(gr) * part.grid_cols + gc];
            block.assign(part.vectors_per_block, std::vector<double>(config.vector_len));
            int flat = 0;
            for (int r = 0; r < config.block_rows; ++r) {
                for (int c = 0; c < config.block_cols; ++c) {
                    block[flat / config.vector_len][flat % config.vector_len] =
                        w.at(gr * config.block_rows + r, gc * config.block_cols + c);
                    ++flat;
                }
            }
        }
    }
    return part;
}

namespace {

// Seeded k-means with k-means++ init; relabels clusters by first occurrence
// so the result is stable under any internal ordering.
struct KmeansResult {
    std::vector<std::vector<double>> centroids;
    std::vector<int> labels;
};

KmeansResult kmeans(const std::vector<std::vector<double>>& points, int k, Rng& rng) {
    int n = static_cast<int>(points.size());
    int dim = static_cast<int>(points[0].size());
    std::vector<std::vector<double>> centers;
    centers.reserve(k);
    centers.push_back(points[rng.uniform_int(0, n - 1)]);
    std::vector<double> dist(n);
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            for (const auto& c : centers) best = std::min(best, sq_dist(points[i], c));
            dist[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            // All remaining points coincide with existing centers.
            centers.push_back(points[rng.uniform_int(0, n - 1)]);
            continue;
        }
        double target = rng.uniform() * total;
        int pick = n - 1;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += dist[i];
            if (acc >= target) {
                pick = i;
                break;
            }
        }
        centers.push_back(points[pick]);
    }

    std::vector<int> labels(n, 0);
    const int max_iters = 50;
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            int arg = 0;
            for (int c = 0; c < k; ++c) {
                double d = sq_dist(points[i], centers[c]);
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            if (arg != labels[i]) {
                labels[i] = arg;
                changed = true;
            }
        }
        std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) {
            ++counts[labels[i]];
            for (int j = 0; j < dim; ++j) sums[labels[i]][j] += points[i][j];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Move the empty center onto the point farthest from its center.
                int far = 0;
                double far_d = -1.0;
                for (int i = 0; i < n; ++i) {
                    double d = sq_dist(points[i], centers[labels[i]]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                centers[c] = points[far];
                labels[far] = c;
                changed = true;
            } else {
                for (int j = 0; j < dim; ++j) centers[c][j] = sums[c][j] / counts[c];
            }
        }
        if (!changed && iter > 0) break;
    }

    // First-occurrence relabeling.
    std::vector<int> remap(k, -1);
    int next = 0;
    for (int i = 0; i < n; ++i) {
        if (remap[labels[i]] < 0) remap[labels[i]] = next++;
    }
    for (int c = 0; c < k; ++c) {
        if (remap[c] < 0) remap[c] = next++;
    }
    KmeansResult res;
    res.centroids.resize(k);
    for (int c = 0; c < k; ++c) res.centroids[remap[c]] = centers[c];
    res.labels.resize(n);
    for (int i = 0; i < n; ++i) res.labels[i] = remap[labels[i]];
    return res;
}

std::vector<std::vector<int8_t>> quantize_codebook(const std::vector<std::vector<double>>& entries,
                                                   double* scale_out) {
    double max_abs = 0.0;
    for (const auto& e : entries) {
        for (double v : e) max_abs = std::max(max_abs, std::abs(v));
    }
    double scale = max_abs > 0.0 ? as_f32(max_abs / 7.0) : 1.0;
    std::vector<std::vector<int8_t>> out(entries.size());
    for (size_t e = 0; e < entries.size(); ++e) {
        out[e].resize(entries[e].size());
        for (size_t j = 0; j < entries[e].size(); ++j) out[e][j] = quant4(entries[e][j], scale);
    }
    *scale_out = scale;
    return out;
}

int nearest_entry(const std::vector<double>& v, const std::vector<std::vector<int8_t>>& cb,
                  double scale) {
    double best = std::numeric_limits<double>::max();
    int arg = 0;
    for (size_t e = 0; e < cb.size(); ++e) {
        double d = 0.0;
        for (size_t j = 0; j < v.size(); ++j) {
            double diff = v[j] - scale * cb[e][j];
            d += diff * diff;
        }
        if (d < best) {
            best = d;
            arg = static_cast<int>(e);
        }
    }
    return arg;
}

}  // namespace

BvqModel kmeans_init(const BlockPartition& blocks, const BvqConfig& config) {
    config.validate();
    BvqModel model;
    model.config = config;
    model.rows = blocks.rows;
    model.cols = blocks.cols;
    int num_blocks = blocks.grid_rows * blocks.grid_cols;
    model.cluster_of_block.resize(num_blocks);
    for (int b = 0; b < num_blocks; ++b) {
        model.cluster_of_block[b] = b / blocks.grid_cols;  // one codebook per block-row
    }
    int num_clusters = blocks.grid_rows;
    int c_entries = config.codebook_entries;

    model.codebooks.resize(num_clusters);
    model.scales.resize(num_clusters);
    model.indices.assign(num_blocks, std::vector<int>(blocks.vectors_per_block, 0));

    Rng rng(config.seed);
    for (int cl = 0; cl < num_clusters; ++cl) {
        std::vector<std::vector<double>> points;
        for (int b = 0; b < num_blocks; ++b) {
            if (model.cluster_of_block[b] != cl) continue;
            for (const auto& v : blocks.subvectors[b]) points.push_back(v);
        }
        if (static_cast<int>(points.size()) < c_entries) {
            throw DegenerateClusterError("bvq: cluster " + std::to_string(cl) + " has " +
                                         std::to_string(points.size()) + " sub-vectors, needs >= " +
                                         std::to_string(c_entries));
        }
        KmeansResult km = kmeans(points, c_entries, rng);
        double scale = 1.0;
        model.codebooks[cl] = quantize_codebook(km.centroids, &scale);
        model.scales[cl] = scale;
        for (int b = 0; b < num_blocks; ++b) {
            if (model.cluster_of_block[b] != cl) continue;
            for (int v = 0; v < blocks.vectors_per_block; ++v) {
                model.indices[b][v] =
                    nearest_entry(blocks.subvectors[b][v], model.codebooks[cl], scale);
            }
        }
    }
    model.validate();
    return model;
}

Mat reconstruct(const BvqModel& model) {
    const BvqConfig& cfg = model.config;
    Mat out(model.rows, model.cols);
    int grid_cols = model.cols / cfg.block_cols;
    int num_blocks = static_cast<int>(model.indices.size());
    for (int b = 0; b < num_blocks; ++b) {
        int gr = b / grid_cols;
        int gc = b % grid_cols;
        int cl = model.cluster_of_block[b];
        double scale = model.scales[cl];
        int flat = 0;
        for (int r = 0; r < cfg.block_rows; ++r) {
            for (int c = 0; c < cfg.block_cols; ++c) {
                int v = flat / cfg.vector_len;
                int j = flat % cfg.vector_len;
                out.at(gr * cfg.block_rows + r, gc * cfg.block_cols + c) =
                    scale * model.codebooks[cl][model.indices[b][v]][j];
                ++flat;
            }
        }
    }
    return out;
}

double reconstruction_mse(const BvqModel& model, const Mat& w) {
    Mat r = reconstruct(model);
    if (!r.same_shape(w)) {
        throw ShapeError("reconstruction_mse: shape mismatch");
    }
    double s = 0.0;
    for (size_t i = 0; i < w.a.size(); ++i) {
        double d = r.a[i] - w.a[i];
        s += d * d;
    }
    return s / static_cast<double>(w.a.size());
}

double direct_int4_mse(const Mat& w) {
    QuantizedTensor q = quantize_w4(w);
    double s = 0.0;
    for (int r = 0; r < w.rows; ++r) {
        for (int c = 0; c < w.cols; ++c) {
            double d = q.dequant(r, c) - w.at(r, c);
            s += d * d;
        }
    }
    return s / static_cast<double>(w.a.size());
}

SoftLossGrad soft_assignment_loss(const std::vector<std::vector<double>>& targets,
                                  const std::vector<std::vector<double>>& logits,
                                  const std::vector<std::vector<double>>& gumbel,
                                  const std::vector<std::vector<double>>& entries,
                                  double tau) {
    size_t num_vecs = targets.size();
    size_t num_entries = entries.size();
    size_t dim = entries.empty() ? 0 : entries[0].size();

    SoftLossGrad out;
    out.d_logits.assign(num_vecs, std::vector<double>(num_entries, 0.0));
    out.d_entries.assign(num_entries, std::vector<double>(dim, 0.0));

    std::vector<double> p(num_entries);
    std::vector<double> recon(dim);
    std::vector<double> q(num_entries);
    for (size_t v = 0; v < num_vecs; ++v) {
        // softmax((logits + g) / tau)
        double mx = -std::numeric_limits<double>::max();
        for (size_t e = 0; e < num_entries; ++e) {
            mx = std::max(mx, (logits[v][e] + gumbel[v][e]) / tau);
        }
        double z = 0.0;
        for (size_t e = 0; e < num_entries; ++e) {
            p[e] = std::exp((logits[v][e] + gumbel[v][e]) / tau - mx);
            z += p[e];
        }
        for (size_t e = 0; e < num_entries; ++e) p[e] /= z;

        std::fill(recon.begin(), recon.end(), 0.0);
        for (size_t e = 0; e < num_entries; ++e) {
            for (size_t j = 0; j < dim; ++j) recon[j] += p[e] * entries[e][j];
        }
        double dot_pq = 0.0;
        for (size_t e = 0; e < num_entries; ++e) {
            double qe = 0.0;
            for (size_t j = 0; j < dim; ++j) qe += (recon[j] - targets[v][j]) * entries[e][j];
            q[e] = qe;
            dot_pq += p[e] * qe;
        }
        for (size_t j = 0; j < dim; ++j) {
            double r = recon[j] - targets[v][j];
            out.loss += r * r;
            for (size_t e = 0; e < num_entries; ++e) {
                out.d_entries[e][j] += 2.0 * r * p[e];
            }
        }
        for (size_t e = 0; e < num_entries; ++e) {
            out.d_logits[v][e] = (2.0 / tau) * p[e] * (q[e] - dot_pq);
        }
    }
    return out;
}

BvqModel gumbel_refine(const BvqModel& model, const Mat& w, const BvqConfig& config) {
    config.validate();
    BlockPartition part = partition_blocks(w, config);
    int num_blocks = part.grid_rows * part.grid_cols;
    int num_clusters = part.grid_rows;
    int c_entries = config.codebook_entries;
    int dim = config.vector_len;

    // Per-cluster target lists and a map back to (block, subvector).
    std::vector<std::vector<std::vector<double>>> targets(num_clusters);
    std::vector<std::vector<std::pair<int, int>>> origin(num_clusters);
    for (int b = 0; b < num_blocks; ++b) {
        int cl = model.cluster_of_block[b];
        for (int v = 0; v < part.vectors_per_block; ++v) {
            targets[cl].push_back(part.subvectors[b][v]);
            origin[cl].push_back({b, v});
        }
    }

    // Float codebooks initialized from the input model; logits favor the
    // input model's assignment.
    std::vector<std::vector<std::vector<double>>> entries(num_clusters);
    std::vector<std::vector<std::vector<double>>> logits(num_clusters);
    for (int cl = 0; cl < num_clusters; ++cl) {
        entries[cl].assign(c_entries, std::vector<double>(dim, 0.0));
        for (int e = 0; e < c_entries; ++e) {
            for (int j = 0; j < dim; ++j) {
                entries[cl][e][j] = model.scales[cl] * model.codebooks[cl][e][j];
            }
        }
        logits[cl].assign(targets[cl].size(), std::vector<double>(c_entries, 0.0));
        for (size_t v = 0; v < targets[cl].size(); ++v) {
            auto [b, sv] = origin[cl][v];
            logits[cl][v][model.indices[b][sv]] = 1.0;
        }
    }

    BvqModel best = model;
    double best_mse = reconstruction_mse(model, w);

    auto snapshot = [&](BvqModel& out) {
        out = model;
        for (int cl = 0; cl < num_clusters; ++cl) {
            double scale = 1.0;
            out.codebooks[cl] = quantize_codebook(entries[cl], &scale);
            out.scales[cl] = scale;
            for (size_t v = 0; v < targets[cl].size(); ++v) {
                auto [b, sv] = origin[cl][v];
                int arg = 0;
                double mx = -std::numeric_limits<double>::max();
                for (int e = 0; e < c_entries; ++e) {
                    if (logits[cl][v][e] > mx) {
                        mx = logits[cl][v][e];
                        arg = e;
                    }
                }
                out.indices[b][sv] = arg;
            }
        }
    };

    Rng rng(config.seed + 0x9e3779b97f4a7c15ull);
    std::vector<std::vector<double>> gumbel;
    std::vector<std::vector<double>> eff(c_entries, std::vector<double>(dim));
    for (int step = 0; step < config.refine_steps; ++step) {
        double tau = config.tau_initial;
        if (config.refine_steps > 1) {
            double t = static_cast<double>(step) / (config.refine_steps - 1);
            tau = config.tau_initial * std::pow(config.tau_final / config.tau_initial, t);
        }
        double step_loss = 0.0;
        for (int cl = 0; cl < num_clusters; ++cl) {
            size_t nv = targets[cl].size();
            gumbel.assign(nv, std::vector<double>(c_entries));
            for (auto& row : gumbel) {
                for (auto& g : row) {
                    double u = rng.uniform();
                    while (u <= 0.0) u = rng.uniform();
                    g = -std::log(-std::log(u));
                }
            }
            // Straight-through 4-bit effective entries.
            double max_abs = 0.0;
            for (const auto& e : entries[cl]) {
                for (double v : e) max_abs = std::max(max_abs, std::abs(v));
            }
            double scale = max_abs > 0.0 ? as_f32(max_abs / 7.0) : 1.0;
            for (int e = 0; e < c_entries; ++e) {
                for (int j = 0; j < dim; ++j) {
                    eff[e][j] = scale * quant4(entries[cl][e][j], scale);
                }
            }
            SoftLossGrad g = soft_assignment_loss(targets[cl], logits[cl], gumbel, eff, tau);
            step_loss += g.loss;
            for (int e = 0; e < c_entries; ++e) {
                for (int j = 0; j < dim; ++j) {
                    entries[cl][e][j] -= config.learning_rate * g.d_entries[e][j];
                }
            }
            for (size_t v = 0; v < nv; ++v) {
                for (int e = 0; e < c_entries; ++e) {
                    logits[cl][v][e] -= config.learning_rate * g.d_logits[v][e];
                }
            }
        }
        if (!std::isfinite(step_loss)) {
            throw DivergenceError("bvq: non-finite loss at refine step " + std::to_string(step));
        }
        BvqModel cand;
        snapshot(cand);
        double mse = reconstruction_mse(cand, w);
        if (mse < best_mse) {
            best_mse = mse;
            best = cand;
        }
    }
    best.validate();
    return best;
}

Mat planted_prototype_weights(int rows, int cols, const BvqConfig& config, int num_prototypes,
                              double noise, uint64_t seed) {
    config.validate();
    if (rows % config.block_rows != 0 || cols % config.block_cols != 0) {
        throw ConfigError("planted weights: " + std::to_string(rows) + "x" +
                          std::to_string(cols) + " does not tile by " +
                          std::to_string(config.block_rows) + "x" +
                          std::to_string(config.block_cols) + " blocks");
    }
    Rng rng(seed);
    int grid_rows = rows / config.block_rows;
    int grid_cols = cols / config.block_cols;
    int vpb = config.block_rows * config.block_cols / config.vector_len;
    Mat w(rows, cols);
    for (int gr = 0; gr < grid_rows; ++gr) {
        double magnitude = (gr % 2 == 0) ? 4.0 : 0.25;
        std::vector<std::vector<double>> protos(num_prototypes,
                                                std::vector<double>(config.vector_len));
        for (auto& p : protos) {
            for (auto& v : p) v = magnitude * rng.uniform(-1.0, 1.0);
        }
        for (int gc = 0; gc < grid_cols; ++gc) {
            for (int v = 0; v < vpb; ++v) {
                const auto& p = protos[rng.uniform_int(0, num_prototypes - 1)];
                for (int j = 0; j < config.vector_len; ++j) {
                    int flat = v * config.vector_len + j;
                    int r = gr * config.block_rows + flat / config.block_cols;
                    int c = gc * config.block_cols + flat % config.block_cols;
                    w.at(r, c) = p[j] + noise * magnitude * rng.normal();
                }
            }
        }
    }
    return w;
}

CompressionReport compression_report(const BvqModel& model, int original_bits_per_weight) {
    CompressionReport rep;
    rep.elements = static_cast<int64_t>(model.rows) * model.cols;
    rep.original_bits = rep.elements * original_bits_per_weight;
    int dim = model.config.vector_len;
    for (const auto& cb : model.codebooks) {
        rep.codebook_bits += static_cast<int64_t>(cb.size()) * dim * 4;
    }
    int idx_bits = index_bit_width(model.config.codebook_entries);
    int64_t num_subvectors = 0;
    for (const auto& block : model.indices) num_subvectors += static_cast<int64_t>(block.size());
    rep.index_bits = num_subvectors * idx_bits;
    rep.scale_bits = static_cast<int64_t>(model.scales.size()) * 32;
    rep.ratio = static_cast<double>(rep.original_bits) /
                static_cast<double>(rep.codebook_bits + rep.index_bits + rep.scale_bits);
    return rep;
}

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

uint32_t get_u32(const std::vector<uint8_t>& in, size_t& pos) {
    if (pos + 4 > in.size()) throw ValueError("bvq deserialize: truncated header");
    uint32_t v = static_cast<uint32_t>(in[pos]) | (static_cast<uint32_t>(in[pos + 1]) << 8) |
                 (static_cast<uint32_t>(in[pos + 2]) << 16) |
                 (static_cast<uint32_t>(in[pos + 3]) << 24);
    pos += 4;
    return v;
}

}  // namespace

std::vector<uint8_t> serialize_bvq(const BvqModel& model) {
    std::vector<uint8_t> out;
    out.push_back('B');
    out.push_back('V');
    out.push_back('Q');
    out.push_back('1');
    put_u32(out, static_cast<uint32_t>(model.rows));
    put_u32(out, static_cast<uint32_t>(model.cols));
    put_u32(out, static_cast<uint32_t>(model.config.block_rows));
    put_u32(out, static_cast<uint32_t>(model.config.block_cols));
    put_u32(out, static_cast<uint32_t>(model.config.vector_len));
    put_u32(out, static_cast<uint32_t>(model.config.codebook_entries));
    put_u32(out, static_cast<uint32_t>(model.codebooks.size()));
    put_u32(out, static_cast<uint32_t>(model.indices.size()));

    // Scales: float32 little-endian, one per codebook.
    for (double s : model.scales) {
        float f = static_cast<float>(s);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
    }
    // Codebooks: packed nibbles, low nibble first.
    {
        int hi = 0;
        uint8_t pending = 0;
        for (const auto& cb : model.codebooks) {
            for (const auto& entry : cb) {
                for (int8_t v : entry) {
                    uint8_t nib = static_cast<uint8_t>(v) & 0xf;
                    if (hi == 0) {
                        pending = nib;
                        hi = 1;
                    } else {
                        out.push_back(static_cast<uint8_t>(pending | (nib << 4)));
                        hi = 0;
                    }
                }
            }
        }
        if (hi == 1) out.push_back(pending);
    }
    // Indices: little-endian bit stream, log2(C) bits per sub-vector.
    {
        int bits_per = index_bit_width(model.config.codebook_entries);
        uint64_t acc = 0;
        int acc_bits = 0;
        for (const auto& block : model.indices) {
            for (int idx : block) {
                acc |= static_cast<uint64_t>(idx) << acc_bits;
                acc_bits += bits_per;
                while (acc_bits >= 8) {
                    out.push_back(static_cast<uint8_t>(acc & 0xff));
                    acc >>= 8;
                    acc_bits -= 8;
                }
            }
        }
        if (acc_bits > 0) out.push_back(static_cast<uint8_t>(acc & 0xff));
    }
    return out;
}

BvqModel deserialize_bvq(const std::vector<uint8_t>& bytes) {
    size_t pos = 0;
    if (bytes.size() < 4 || bytes[0] != 'B' || bytes[1] != 'V' || bytes[2] != 'Q' ||
        bytes[3] != '1') {
        throw ValueError("bvq deserialize: bad magic");
    }
    pos = 4;
    BvqModel model;
    model.rows = static_cast<int>(get_u32(bytes, pos));
    model.cols = static_cast<int>(get_u32(bytes, pos));
    model.config.block_rows = static_cast<int>(get_u32(bytes, pos));
    model.config.block_cols = static_cast<int>(get_u32(bytes, pos));
    model.config.vector_len = static_cast<int>(get_u32(bytes, pos));
    model.config.codebook_entries = static_cast<int>(get_u32(bytes, pos));
    int num_codebooks = static_cast<int>(get_u32(bytes, pos));
    int num_blocks = static_cast<int>(get_u32(bytes, pos));

    model.scales.resize(num_codebooks);
    for (int i = 0; i < num_codebooks; ++i) {
        uint32_t bits = get_u32(bytes, pos);
        float f;
        std::memcpy(&f, &bits, 4);
        model.scales[i] = static_cast<double>(f);
    }
    int dim = model.config.vector_len;
    int c_entries = model.config.codebook_entries;
    int64_t nibbles = static_cast<int64_t>(num_codebooks) * c_entries * dim;
    model.codebooks.assign(num_codebooks,
                           std::vector<std::vector<int8_t>>(c_entries, std::vector<int8_t>(dim)));
    for (int64_t i = 0; i < nibbles; ++i) {
        size_t byte = pos + static_cast<size_t>(i / 2);
        if (byte >= bytes.size()) throw ValueError("bvq deserialize: truncated codebooks");
        uint8_t nib = (i % 2 == 0) ? (bytes[byte] & 0xf) : (bytes[byte] >> 4);
        int8_t v = static_cast<int8_t>(nib >= 8 ? static_cast<int>(nib) - 16 : nib);
        int cb = static_cast<int>(i / (c_entries * dim));
        int rem = static_cast<int>(i % (c_entries * dim));
        model.codebooks[cb][rem / dim][rem % dim] = v;
    }
    pos += static_cast<size_t>((nibbles + 1) / 2);

    int vectors_per_block = model.config.block_rows * model.config.block_cols / dim;
    int bits_per = index_bit_width(c_entries);
    model.indices.assign(num_blocks, std::vector<int>(vectors_per_block, 0));
    {
        uint64_t acc = 0;
        int acc_bits = 0;
        size_t byte = pos;
        for (auto& block : model.indices) {
            for (auto& idx : block) {
                while (acc_bits < bits_per) {
                    if (byte >= bytes.size()) throw ValueError("bvq deserialize: truncated indices");
                    acc |= static_cast<uint64_t>(bytes[byte++]) << acc_bits;
                    acc_bits += 8;
                }
                idx = static_cast<int>(acc & ((1u << bits_per) - 1));
                if (bits_per == 0) idx = 0;
                acc >>= bits_per;
                acc_bits -= bits_per;
            }
        }
    }
    int grid_cols = model.config.block_cols > 0 ? model.cols / model.config.block_cols : 0;
    model.cluster_of_block.resize(num_blocks);
    for (int b = 0; b < num_blocks; ++b) {
        model.cluster_of_block[b] = grid_cols > 0 ? b / grid_cols : 0;
    }
    model.validate();
    return model;
}

}  // namespace sdsim
