#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "sdsim/bvq.hpp"
#include "sdsim/simkernel.hpp"

namespace sdsim {

// One self-describing scenario file drives every CLI command. All randomness
// flows from the seeds listed here; reports are byte-reproducible given the
// same config.
struct ScenarioConfig {
    int schema_version = 1;

    struct Rotation {
        int n = 448;
        int depth_cap = 6;
        std::vector<int> orders = {1, 12, 20, 28};
        std::vector<std::string> matrix_files;
    } rotation;

    struct QuantEval {
        int n = 2048;
        int trials = 100;
        int tokens_per_trial = 8;
        int weight_cols = 64;
        double outlier_min = 50.0;
        double outlier_max = 200.0;
    } quant_eval;

    struct Bvq {
        BvqConfig config;
        int rows = 64;
        int cols = 64;
        int num_prototypes = 4;
        double noise = 0.02;
        std::string weights_file;  // optional text matrix; synthetic when empty
    } bvq;

    StackConfig stack;
    WorkloadConfig workload;

    struct Decode {
        int gamma_short = 4;
        int gamma_long = 8;
        int steps = 48;
        int vocab = 256;
        int dim = 64;
        int layers = 4;
        int heads = 4;
        int max_context = 512;
        double dlm_epsilon = 0.005;
        int prompt_len = 8;
        bool wdos_detail = false;
    } decode;

    std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};

    struct Output {
        std::string dir = "out";
        std::string format = "both";  // csv | json | both
    } output;

    // Scenario overlays for the sweep command (RFC 7386 merge patches).
    struct SweepCase {
        std::string name;
        nlohmann::json patch;
    };
    std::vector<SweepCase> sweep;

    static ScenarioConfig from_json(const nlohmann::json& j);
    static ScenarioConfig load(const std::string& path);
    nlohmann::json to_json() const;

    // Cross-field checks (block width vs bank width, context budget, ...).
    void validate() const;

    LadderConfig ladder() const;
};

// Plain text matrix: first line "rows cols", then rows lines of cols values.
Mat load_matrix_text(const std::string& path);

}  // namespace sdsim
