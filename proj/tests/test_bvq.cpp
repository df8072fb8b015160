#include "doctest.h"

#include <cmath>

#include "sdsim/bvq.hpp"
#include "sdsim/rng.hpp"

using namespace sdsim;

namespace {

BvqConfig small_config() {
    BvqConfig c;
    c.block_rows = 4;
    c.block_cols = 8;
    c.vector_len = 8;
    c.codebook_entries = 4;
    c.refine_steps = 60;
    c.learning_rate = 0.05;
    c.seed = 11;
    return c;
}

}  // namespace

TEST_CASE("partition block counts") {
    BvqConfig c = small_config();
    Mat w(64, 64);
    BlockPartition p = partition_blocks(w, c);
    CHECK(p.grid_rows * p.grid_cols == 128);
    CHECK(p.vectors_per_block == 4);

    BvqConfig one = c;
    one.block_rows = 8;
    one.block_cols = 8;
    Mat w8(8, 8);
    BlockPartition p1 = partition_blocks(w8, one);
    CHECK(p1.grid_rows * p1.grid_cols == 1);

    Mat bad(10, 8);
    CHECK_THROWS_AS(partition_blocks(bad, one), ConfigError);
    try {
        partition_blocks(bad, one);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("10") != std::string::npos);
    }
}

TEST_CASE("partition layout is row-major inside blocks") {
    BvqConfig c;
    c.block_rows = 2;
    c.block_cols = 2;
    c.vector_len = 2;
    c.codebook_entries = 2;
    Mat w(2, 4);
    // [[1 2 | 3 4]
    //  [5 6 | 7 8]]
    double vals[] = {1, 2, 3, 4, 5, 6, 7, 8};
    for (int r = 0; r < 2; ++r) {
        for (int col = 0; col < 4; ++col) w.at(r, col) = vals[r * 4 + col];
    }
    BlockPartition p = partition_blocks(w, c);
    CHECK(p.subvectors[0][0] == std::vector<double>{1, 2});
    CHECK(p.subvectors[0][1] == std::vector<double>{5, 6});
    CHECK(p.subvectors[1][0] == std::vector<double>{3, 4});
    CHECK(p.subvectors[1][1] == std::vector<double>{7, 8});
}

TEST_CASE("kmeans_init matches hand-run clustering") {
    BvqConfig c;
    c.block_rows = 4;
    c.block_cols = 2;
    c.vector_len = 2;
    c.codebook_entries = 2;
    c.seed = 3;
    Mat w(4, 2);
    w.at(0, 0) = 0;
    w.at(0, 1) = 0;
    w.at(1, 0) = 0;
    w.at(1, 1) = 1;
    w.at(2, 0) = 10;
    w.at(2, 1) = 10;
    w.at(3, 0) = 10;
    w.at(3, 1) = 11;
    BlockPartition p = partition_blocks(w, c);
    BvqModel m = kmeans_init(p, c);

    // Centroids {0, 0.5} and {10, 10.5}; scale = 10.5 / 7 = 1.5 exactly.
    CHECK(m.scales[0] == doctest::Approx(1.5));
    CHECK(m.codebooks[0][0] == std::vector<int8_t>{0, 0});
    CHECK(m.codebooks[0][1] == std::vector<int8_t>{7, 7});
    CHECK(m.indices[0] == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("kmeans_init identical vectors, C=1") {
    BvqConfig c;
    c.block_rows = 2;
    c.block_cols = 4;
    c.vector_len = 4;
    c.codebook_entries = 1;
    Mat w(4, 4);
    for (int r = 0; r < 4; ++r) {
        for (int col = 0; col < 4; ++col) w.at(r, col) = 0.7 * (col + 1);
    }
    BlockPartition p = partition_blocks(w, c);
    BvqModel m = kmeans_init(p, c);
    // Centroid = mean of identical vectors = the vector itself.
    double mse = reconstruction_mse(m, w);
    // Error is pure int4 rounding of [0.7, 1.4, 2.1, 2.8] at scale (2.8 / 7).
    CHECK(mse < (m.scales[0] / 2) * (m.scales[0] / 2) + 1e-12);
}

TEST_CASE("kmeans_init C=1 centroid is the mean") {
    BvqConfig c;
    c.block_rows = 2;
    c.block_cols = 2;
    c.vector_len = 2;
    c.codebook_entries = 1;
    Mat w(2, 2);
    w.at(0, 0) = 1.0;
    w.at(0, 1) = 3.0;
    w.at(1, 0) = 5.0;
    w.at(1, 1) = 7.0;
    BlockPartition p = partition_blocks(w, c);
    BvqModel m = kmeans_init(p, c);
    // Mean of {[1,3],[5,7]} is [3,5]; scale = 5/7.
    double scale = m.scales[0];
    CHECK(scale * m.codebooks[0][0][0] == doctest::Approx(3.0).epsilon(0.1));
    CHECK(scale * m.codebooks[0][0][1] == doctest::Approx(5.0).epsilon(0.1));
}

TEST_CASE("kmeans_init degenerate cluster error") {
    BvqConfig c;
    c.block_rows = 2;
    c.block_cols = 2;
    c.vector_len = 4;
    c.codebook_entries = 16;  // 1 sub-vector per block, 1 block per row: too few
    Mat w(2, 2);
    BlockPartition p = partition_blocks(w, c);
    CHECK_THROWS_AS(kmeans_init(p, c), DegenerateClusterError);
}

TEST_CASE("soft assignment gradient matches central finite differences") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        int nv = 2 + trial % 3;
        int ne = 2 + trial % 2;
        int dim = 2;
        double tau = 1.0;
        std::vector<std::vector<double>> targets(nv, std::vector<double>(dim));
        std::vector<std::vector<double>> logits(nv, std::vector<double>(ne));
        std::vector<std::vector<double>> gumbel(nv, std::vector<double>(ne));
        std::vector<std::vector<double>> entries(ne, std::vector<double>(dim));
        for (auto& t : targets)
            for (auto& v : t) v = rng.uniform(-2, 2);
        for (auto& l : logits)
            for (auto& v : l) v = rng.uniform(-1, 1);
        for (auto& g : gumbel)
            for (auto& v : g) v = rng.uniform(-1, 1);
        for (auto& e : entries)
            for (auto& v : e) v = rng.uniform(-2, 2);

        SoftLossGrad grad = soft_assignment_loss(targets, logits, gumbel, entries, tau);

        const double h = 1e-6;
        double max_rel = 0.0;
        auto rel = [&](double analytic, double numeric) {
            double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            return std::abs(analytic - numeric) / denom;
        };
        for (int v = 0; v < nv; ++v) {
            for (int e = 0; e < ne; ++e) {
                auto lp = logits;
                auto lm = logits;
                lp[v][e] += h;
                lm[v][e] -= h;
                double fp = soft_assignment_loss(targets, lp, gumbel, entries, tau).loss;
                double fm = soft_assignment_loss(targets, lm, gumbel, entries, tau).loss;
                max_rel = std::max(max_rel, rel(grad.d_logits[v][e], (fp - fm) / (2 * h)));
            }
        }
        for (int e = 0; e < ne; ++e) {
            for (int j = 0; j < dim; ++j) {
                auto ep = entries;
                auto em = entries;
                ep[e][j] += h;
                em[e][j] -= h;
                double fp = soft_assignment_loss(targets, logits, gumbel, ep, tau).loss;
                double fm = soft_assignment_loss(targets, logits, gumbel, em, tau).loss;
                max_rel = std::max(max_rel, rel(grad.d_entries[e][j], (fp - fm) / (2 * h)));
            }
        }
        CHECK(max_rel <= 1e-4);
    }
}

TEST_CASE("gumbel_refine never worsens reconstruction") {
    BvqConfig c = small_config();
    Mat w = planted_prototype_weights(32, 32, c, 4, 0.05, 7);
    BlockPartition p = partition_blocks(w, c);
    BvqModel init = kmeans_init(p, c);
    double init_mse = reconstruction_mse(init, w);
    BvqModel refined = gumbel_refine(init, w, c);
    CHECK(reconstruction_mse(refined, w) <= init_mse + 1e-15);
}

TEST_CASE("gumbel_refine with zero steps returns the input model") {
    BvqConfig c = small_config();
    c.refine_steps = 0;
    Mat w = planted_prototype_weights(16, 16, c, 4, 0.02, 3);
    BlockPartition p = partition_blocks(w, c);
    BvqModel init = kmeans_init(p, c);
    BvqModel out = gumbel_refine(init, w, c);
    CHECK(serialize_bvq(out) == serialize_bvq(init));
}

TEST_CASE("gumbel_refine diverges loudly on an absurd learning rate") {
    BvqConfig c = small_config();
    c.learning_rate = 1e120;
    c.refine_steps = 10;
    Mat w = planted_prototype_weights(16, 16, c, 4, 0.02, 3);
    BlockPartition p = partition_blocks(w, c);
    BvqModel init = kmeans_init(p, c);
    CHECK_THROWS_AS(gumbel_refine(init, w, c), DivergenceError);
    try {
        gumbel_refine(init, w, c);
    } catch (const DivergenceError& e) {
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}

TEST_CASE("planted prototypes: BVQ beats direct int4") {
    BvqConfig c = small_config();
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        c.seed = seed;
        Mat w = planted_prototype_weights(32, 64, c, 4, 0.02, seed * 17 + 1);
        BlockPartition p = partition_blocks(w, c);
        BvqModel init = kmeans_init(p, c);
        BvqModel refined = gumbel_refine(init, w, c);
        CHECK(reconstruction_mse(refined, w) <= direct_int4_mse(w));
    }
}

TEST_CASE("reconstruct shape and exact layout round trip") {
    BvqConfig c;
    c.block_rows = 2;
    c.block_cols = 2;
    c.vector_len = 2;
    c.codebook_entries = 2;
    BvqModel m;
    m.config = c;
    m.rows = 2;
    m.cols = 4;
    m.codebooks = {{{1, 2}, {3, 4}}};
    m.scales = {1.0};
    m.cluster_of_block = {0, 0};
    m.indices = {{0, 1}, {1, 0}};
    Mat r = reconstruct(m);
    CHECK(r.rows == 2);
    CHECK(r.cols == 4);
    // Block 0: subvec 0 -> entry0 [1,2] on row 0, subvec 1 -> entry1 [3,4] on row 1.
    CHECK(r.at(0, 0) == 1.0);
    CHECK(r.at(0, 1) == 2.0);
    CHECK(r.at(1, 0) == 3.0);
    CHECK(r.at(1, 1) == 4.0);
    // Block 1 swaps the entries.
    CHECK(r.at(0, 2) == 3.0);
    CHECK(r.at(0, 3) == 4.0);
    CHECK(r.at(1, 2) == 1.0);
    CHECK(r.at(1, 3) == 2.0);
}

TEST_CASE("compression report arithmetic") {
    BvqConfig c;
    c.block_rows = 64;
    c.block_cols = 64;
    c.vector_len = 8;
    c.codebook_entries = 16;
    BvqModel m;
    m.config = c;
    m.rows = 64;
    m.cols = 64;
    m.codebooks.resize(1);
    m.codebooks[0].assign(16, std::vector<int8_t>(8, 0));
    m.scales = {1.0};
    m.cluster_of_block = {0};
    m.indices = {std::vector<int>(512, 0)};
    CompressionReport rep = compression_report(m, 16);
    CHECK(rep.elements == 4096);
    CHECK(rep.original_bits == 65536);
    CHECK(rep.codebook_bits == 16 * 8 * 4);
    CHECK(rep.index_bits == 512 * 4);
    CHECK(rep.scale_bits == 32);
    CHECK(rep.ratio == doctest::Approx(65536.0 / (512 + 2048 + 32)));

    // C = 1: no index bits.
    BvqConfig c1 = c;
    c1.codebook_entries = 1;
    BvqModel m1 = m;
    m1.config = c1;
    m1.codebooks[0].assign(1, std::vector<int8_t>(8, 0));
    CompressionReport rep1 = compression_report(m1, 16);
    CHECK(rep1.index_bits == 0);

    // Degenerate 1x1 blocks, vector_len 1: scalar int4 plus index overhead.
    BvqConfig cs;
    cs.block_rows = 1;
    cs.block_cols = 1;
    cs.vector_len = 1;
    cs.codebook_entries = 16;
    BvqModel ms;
    ms.config = cs;
    ms.rows = 4;
    ms.cols = 1;
    ms.codebooks.assign(4, std::vector<std::vector<int8_t>>(16, std::vector<int8_t>(1, 0)));
    ms.scales = {1, 1, 1, 1};
    ms.cluster_of_block = {0, 1, 2, 3};
    ms.indices.assign(4, std::vector<int>(1, 0));
    CompressionReport reps = compression_report(ms, 16);
    CHECK(reps.codebook_bits == 4 * 16 * 4);
    CHECK(reps.index_bits == 4 * 4);
    CHECK(reps.ratio == doctest::Approx(64.0 / (256 + 16 + 128)));
}

TEST_CASE("serialization is deterministic and round trips") {
    BvqConfig c = small_config();
    Mat w = planted_prototype_weights(32, 32, c, 4, 0.03, 55);
    BlockPartition p = partition_blocks(w, c);
    BvqModel a = gumbel_refine(kmeans_init(p, c), w, c);
    BvqModel b = gumbel_refine(kmeans_init(p, c), w, c);
    auto bytes_a = serialize_bvq(a);
    auto bytes_b = serialize_bvq(b);
    CHECK(bytes_a == bytes_b);  // same seed, bit-identical

    BvqModel back = deserialize_bvq(bytes_a);
    CHECK(serialize_bvq(back) == bytes_a);
    CHECK(reconstruction_mse(back, w) == doctest::Approx(reconstruction_mse(a, w)));
}

TEST_CASE("serialized nibble and bit layout") {
    BvqConfig c;
    c.block_rows = 1;
    c.block_cols = 2;
    c.vector_len = 2;
    c.codebook_entries = 2;
    BvqModel m;
    m.config = c;
    m.rows = 1;
    m.cols = 4;
    m.codebooks = {{{-1, 7}, {-8, 3}}};
    m.scales = {1.0};
    m.cluster_of_block = {0, 0};
    m.indices = {{1}, {0}};
    auto bytes = serialize_bvq(m);
    // Header: magic + 8 u32 fields = 4 + 32 bytes, then one f32 scale.
    size_t off = 4 + 32 + 4;
    // Nibbles low-first: -1 -> 0xf, 7 -> 0x7 => 0x7f; -8 -> 0x8, 3 -> 0x3 => 0x38.
    CHECK(bytes[off] == 0x7f);
    CHECK(bytes[off + 1] == 0x38);
    // Indices: 1 bit each, little-endian bit order: [1, 0] -> 0b01.
    CHECK(bytes[off + 2] == 0x01);
    CHECK(bytes.size() == off + 3);
}

TEST_CASE("deserialize rejects corrupt input") {
    CHECK_THROWS_AS(deserialize_bvq({1, 2, 3}), ValueError);
    BvqConfig c = small_config();
    Mat w = planted_prototype_weights(16, 16, c, 2, 0.02, 1);
    auto bytes = serialize_bvq(kmeans_init(partition_blocks(w, c), c));
    bytes.resize(bytes.size() / 2);
    CHECK_THROWS_AS(deserialize_bvq(bytes), ValueError);
}
