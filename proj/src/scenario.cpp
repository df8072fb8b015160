#include "sdsim/scenario.hpp"

#include <fstream>
#include <set>

namespace sdsim {

namespace {

using nlohmann::json;

// Typed field access with config-path error messages.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ConfigError("config field '" + path_ + "': expected an object");
        }
    }

    Section child(const char* key) const {
        if (!j_.contains(key)) return Section(json::object(), join(key));
        used_.insert(key);
        return Section(j_.at(key), join(key));
    }

    template <typename T>
    T get(const char* key, T fallback, const char* type_name) const {
        if (!j_.contains(key)) return fallback;
        used_.insert(key);
        const json& v = j_.at(key);
        try {
            return v.get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config field '" + join(key) + "': expected " + type_name);
        }
    }

    int get_int(const char* key, int fallback) const {
        const json* v = peek(key);
        if (v == nullptr) return fallback;
        if (!v->is_number_integer() && !v->is_number_unsigned()) {
            throw ConfigError("config field '" + join(key) + "': expected an integer");
        }
        return v->get<int>();
    }

    double get_double(const char* key, double fallback) const {
        const json* v = peek(key);
        if (v == nullptr) return fallback;
        if (!v->is_number()) {
            throw ConfigError("config field '" + join(key) + "': expected a number");
        }
        return v->get<double>();
    }

    bool get_bool(const char* key, bool fallback) const {
        const json* v = peek(key);
        if (v == nullptr) return fallback;
        if (!v->is_boolean()) {
            throw ConfigError("config field '" + join(key) + "': expected a boolean");
        }
        return v->get<bool>();
    }

    std::string get_string(const char* key, const std::string& fallback) const {
        const json* v = peek(key);
        if (v == nullptr) return fallback;
        if (!v->is_string()) {
            throw ConfigError("config field '" + join(key) + "': expected a string");
        }
        return v->get<std::string>();
    }

    template <typename T>
    std::vector<T> get_array(const char* key, std::vector<T> fallback,
                             const char* elem_type) const {
        const json* v = peek(key);
        if (v == nullptr) return fallback;
        if (!v->is_array()) {
            throw ConfigError("config field '" + join(key) + "': expected an array");
        }
        std::vector<T> out;
        for (const auto& e : *v) {
            try {
                out.push_back(e.get<T>());
            } catch (const json::exception&) {
                throw ConfigError("config field '" + join(key) + "': elements must be " +
                                  elem_type);
            }
        }
        return out;
    }

    const json& raw() const { return j_; }
    const std::string& path() const { return path_; }
    void mark_used(const char* key) const { used_.insert(key); }

    void reject_unknown() const {
        if (!j_.is_object()) return;
        for (const auto& [key, value] : j_.items()) {
            if (used_.find(key) == used_.end()) {
                throw ConfigError("config field '" + join(key.c_str()) + "': unknown key");
            }
        }
    }

private:
    const json* peek(const char* key) const {
        if (!j_.contains(key)) return nullptr;
        used_.insert(key);
        return &j_.at(key);
    }
    std::string join(const char* key) const {
        return path_.empty() ? std::string(key) : path_ + "." + key;
    }

    json j_;
    std::string path_;
    mutable std::set<std::string> used_;
};

}  // namespace

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j) {
    ScenarioConfig cfg;
    Section root(j, "");
    cfg.schema_version = root.get_int("schema_version", -1);
    if (cfg.schema_version != 1) {
        throw ConfigError("config field 'schema_version': must be 1 (got " +
                          std::to_string(cfg.schema_version) + ")");
    }

    Section rot = root.child("rotation");
    cfg.rotation.n = rot.get_int("n", cfg.rotation.n);
    cfg.rotation.depth_cap = rot.get_int("depth_cap", cfg.rotation.depth_cap);
    cfg.rotation.orders = rot.get_array<int>("orders", cfg.rotation.orders, "integers");
    cfg.rotation.matrix_files =
        rot.get_array<std::string>("matrix_files", cfg.rotation.matrix_files, "strings");
    rot.reject_unknown();

    Section qe = root.child("quant_eval");
    cfg.quant_eval.n = qe.get_int("n", cfg.quant_eval.n);
    cfg.quant_eval.trials = qe.get_int("trials", cfg.quant_eval.trials);
    cfg.quant_eval.tokens_per_trial = qe.get_int("tokens_per_trial", cfg.quant_eval.tokens_per_trial);
    cfg.quant_eval.weight_cols = qe.get_int("weight_cols", cfg.quant_eval.weight_cols);
    cfg.quant_eval.outlier_min = qe.get_double("outlier_min", cfg.quant_eval.outlier_min);
    cfg.quant_eval.outlier_max = qe.get_double("outlier_max", cfg.quant_eval.outlier_max);
    qe.reject_unknown();

    Section bq = root.child("bvq");
    cfg.bvq.rows = bq.get_int("rows", cfg.bvq.rows);
    cfg.bvq.cols = bq.get_int("cols", cfg.bvq.cols);
    cfg.bvq.config.block_rows = bq.get_int("block_rows", cfg.bvq.config.block_rows);
    cfg.bvq.config.block_cols = bq.get_int("block_cols", cfg.bvq.config.block_cols);
    cfg.bvq.config.vector_len = bq.get_int("vector_len", cfg.bvq.config.vector_len);
    cfg.bvq.config.codebook_entries =
        bq.get_int("codebook_entries", cfg.bvq.config.codebook_entries);
    cfg.bvq.config.tau_initial = bq.get_double("tau_initial", cfg.bvq.config.tau_initial);
    cfg.bvq.config.tau_final = bq.get_double("tau_final", cfg.bvq.config.tau_final);
    cfg.bvq.config.refine_steps = bq.get_int("refine_steps", cfg.bvq.config.refine_steps);
    cfg.bvq.config.learning_rate = bq.get_double("learning_rate", cfg.bvq.config.learning_rate);
    cfg.bvq.num_prototypes = bq.get_int("num_prototypes", cfg.bvq.num_prototypes);
    cfg.bvq.noise = bq.get_double("noise", cfg.bvq.noise);
    cfg.bvq.weights_file = bq.get_string("weights_file", cfg.bvq.weights_file);
    cfg.bvq.config.seed = static_cast<uint64_t>(
        bq.get_double("seed", static_cast<double>(cfg.bvq.config.seed)));
    bq.reject_unknown();

    Section st = root.child("stack");
    cfg.stack.dies_per_chip = st.get_int("dies_per_chip", cfg.stack.dies_per_chip);
    cfg.stack.capacity_per_die_bytes =
        static_cast<int64_t>(st.get_double("capacity_per_die_bytes",
                                           static_cast<double>(cfg.stack.capacity_per_die_bytes)));
    cfg.stack.bump_bits_per_cycle = st.get_int("bump_bits_per_cycle", cfg.stack.bump_bits_per_cycle);
    cfg.stack.reram_clock_hz = st.get_double("reram_clock_hz", cfg.stack.reram_clock_hz);
    cfg.stack.bank_width_bits = st.get_int("bank_width_bits", cfg.stack.bank_width_bits);
    cfg.stack.banks_per_die = st.get_int("banks_per_die", cfg.stack.banks_per_die);
    cfg.stack.chips = st.get_int("chips", cfg.stack.chips);
    cfg.stack.dram_bandwidth_bytes_per_s =
        st.get_double("dram_bandwidth_bytes_per_s", cfg.stack.dram_bandwidth_bytes_per_s);
    Section en = st.child("energy");
    cfg.stack.energy.reram_pj_per_byte =
        en.get_double("reram_pj_per_byte", cfg.stack.energy.reram_pj_per_byte);
    cfg.stack.energy.dram_pj_per_byte =
        en.get_double("dram_pj_per_byte", cfg.stack.energy.dram_pj_per_byte);
    cfg.stack.energy.pj_per_mac = en.get_double("pj_per_mac", cfg.stack.energy.pj_per_mac);
    en.reject_unknown();
    st.reject_unknown();

    Section wl = root.child("workload");
    cfg.workload.tlm_bytes_bf16 = wl.get_double("tlm_bytes_bf16", cfg.workload.tlm_bytes_bf16);
    cfg.workload.tlm_bytes_w4a8 = wl.get_double("tlm_bytes_w4a8", cfg.workload.tlm_bytes_w4a8);
    cfg.workload.dlm_bytes_bf16 = wl.get_double("dlm_bytes_bf16", cfg.workload.dlm_bytes_bf16);
    cfg.workload.dlm_bytes_w4 = wl.get_double("dlm_bytes_w4", cfg.workload.dlm_bytes_w4);
    cfg.workload.dlm_bytes_bvq = wl.get_double("dlm_bytes_bvq", cfg.workload.dlm_bytes_bvq);
    cfg.workload.tlm_step_ops = wl.get_double("tlm_step_ops", cfg.workload.tlm_step_ops);
    cfg.workload.dlm_step_ops = wl.get_double("dlm_step_ops", cfg.workload.dlm_step_ops);
    cfg.workload.compute_throughput =
        wl.get_double("compute_throughput", cfg.workload.compute_throughput);
    cfg.workload.prefill_tokens = wl.get_int("prefill_tokens", cfg.workload.prefill_tokens);
    wl.reject_unknown();

    Section de = root.child("decode");
    cfg.decode.gamma_short = de.get_int("gamma_short", cfg.decode.gamma_short);
    cfg.decode.gamma_long = de.get_int("gamma_long", cfg.decode.gamma_long);
    cfg.decode.steps = de.get_int("steps", cfg.decode.steps);
    cfg.decode.vocab = de.get_int("vocab", cfg.decode.vocab);
    cfg.decode.dim = de.get_int("dim", cfg.decode.dim);
    cfg.decode.layers = de.get_int("layers", cfg.decode.layers);
    cfg.decode.heads = de.get_int("heads", cfg.decode.heads);
    cfg.decode.max_context = de.get_int("max_context", cfg.decode.max_context);
    cfg.decode.dlm_epsilon = de.get_double("dlm_epsilon", cfg.decode.dlm_epsilon);
    cfg.decode.prompt_len = de.get_int("prompt_len", cfg.decode.prompt_len);
    cfg.decode.wdos_detail = de.get_bool("wdos_detail", cfg.decode.wdos_detail);
    de.reject_unknown();

    cfg.seeds = root.get_array<uint64_t>("seeds", cfg.seeds, "unsigned integers");

    Section out = root.child("output");
    cfg.output.dir = out.get_string("dir", cfg.output.dir);
    cfg.output.format = out.get_string("format", cfg.output.format);
    out.reject_unknown();

    if (j.contains("sweep")) {
        root.mark_used("sweep");
        const json& sw = j.at("sweep");
        if (!sw.is_array()) throw ConfigError("config field 'sweep': expected an array");
        int idx = 0;
        for (const auto& c : sw) {
            if (!c.is_object() || !c.contains("name") || !c.at("name").is_string()) {
                throw ConfigError("config field 'sweep[" + std::to_string(idx) +
                                  "].name': expected a string");
            }
            SweepCase sc;
            sc.name = c.at("name").get<std::string>();
            sc.patch = c;
            sc.patch.erase("name");
            cfg.sweep.push_back(std::move(sc));
            ++idx;
        }
    }
    root.reject_unknown();

    cfg.validate();
    return cfg;
}

ScenarioConfig ScenarioConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    try {
        return from_json(j);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

nlohmann::json ScenarioConfig::to_json() const {
    nlohmann::json j;
    j["schema_version"] = schema_version;
    j["rotation"] = {{"n", rotation.n},
                     {"depth_cap", rotation.depth_cap},
                     {"orders", rotation.orders},
                     {"matrix_files", rotation.matrix_files}};
    j["quant_eval"] = {{"n", quant_eval.n},
                       {"trials", quant_eval.trials},
                       {"tokens_per_trial", quant_eval.tokens_per_trial},
                       {"weight_cols", quant_eval.weight_cols},
                       {"outlier_min", quant_eval.outlier_min},
                       {"outlier_max", quant_eval.outlier_max}};
    j["bvq"] = {{"rows", bvq.rows},
                {"cols", bvq.cols},
                {"block_rows", bvq.config.block_rows},
                {"block_cols", bvq.config.block_cols},
                {"vector_len", bvq.config.vector_len},
                {"codebook_entries", bvq.config.codebook_entries},
                {"tau_initial", bvq.config.tau_initial},
                {"tau_final", bvq.config.tau_final},
                {"refine_steps", bvq.config.refine_steps},
                {"learning_rate", bvq.config.learning_rate},
                {"num_prototypes", bvq.num_prototypes},
                {"noise", bvq.noise},
                {"weights_file", bvq.weights_file}};
    j["stack"] = {{"dies_per_chip", stack.dies_per_chip},
                  {"capacity_per_die_bytes", static_cast<double>(stack.capacity_per_die_bytes)},
                  {"bump_bits_per_cycle", stack.bump_bits_per_cycle},
                  {"reram_clock_hz", stack.reram_clock_hz},
                  {"bank_width_bits", stack.bank_width_bits},
                  {"banks_per_die", stack.banks_per_die},
                  {"chips", stack.chips},
                  {"dram_bandwidth_bytes_per_s", stack.dram_bandwidth_bytes_per_s},
                  {"energy",
                   {{"reram_pj_per_byte", stack.energy.reram_pj_per_byte},
                    {"dram_pj_per_byte", stack.energy.dram_pj_per_byte},
                    {"pj_per_mac", stack.energy.pj_per_mac}}}};
    j["workload"] = {{"tlm_bytes_bf16", workload.tlm_bytes_bf16},
                     {"tlm_bytes_w4a8", workload.tlm_bytes_w4a8},
                     {"dlm_bytes_bf16", workload.dlm_bytes_bf16},
                     {"dlm_bytes_w4", workload.dlm_bytes_w4},
                     {"dlm_bytes_bvq", workload.dlm_bytes_bvq},
                     {"tlm_step_ops", workload.tlm_step_ops},
                     {"dlm_step_ops", workload.dlm_step_ops},
                     {"compute_throughput", workload.compute_throughput},
                     {"prefill_tokens", workload.prefill_tokens}};
    j["decode"] = {{"gamma_short", decode.gamma_short},
                   {"gamma_long", decode.gamma_long},
                   {"steps", decode.steps},
                   {"vocab", decode.vocab},
                   {"dim", decode.dim},
                   {"layers", decode.layers},
                   {"heads", decode.heads},
                   {"max_context", decode.max_context},
                   {"dlm_epsilon", decode.dlm_epsilon},
                   {"prompt_len", decode.prompt_len},
                   {"wdos_detail", decode.wdos_detail}};
    j["seeds"] = seeds;
    j["output"] = {{"dir", output.dir}, {"format", output.format}};
    return j;
}

void ScenarioConfig::validate() const {
    if (rotation.n < 1) throw ConfigError("config field 'rotation.n': must be >= 1");
    if (rotation.depth_cap < 0) {
        throw ConfigError("config field 'rotation.depth_cap': must be >= 0");
    }
    if (quant_eval.trials < 1 || quant_eval.tokens_per_trial < 1 || quant_eval.weight_cols < 1) {
        throw ConfigError("config field 'quant_eval': trials, tokens and columns must be >= 1");
    }
    if (!(quant_eval.outlier_min > 0) || quant_eval.outlier_max < quant_eval.outlier_min) {
        throw ConfigError("config field 'quant_eval.outlier_max': need max >= min > 0");
    }
    bvq.config.validate();
    stack.validate();
    workload.validate();
    if (seeds.empty()) throw ConfigError("config field 'seeds': must not be empty");
    if (output.format != "csv" && output.format != "json" && output.format != "both") {
        throw ConfigError("config field 'output.format': must be csv, json or both");
    }
    // INT4 codebook rows must fit the per-die bank width.
    if (bvq.config.block_cols * 4 > stack.bank_width_bits) {
        throw ConfigError("config field 'bvq.block_cols': " +
                          std::to_string(bvq.config.block_cols) + " int4 columns need " +
                          std::to_string(bvq.config.block_cols * 4) +
                          " bits, exceeding stack.bank_width_bits = " +
                          std::to_string(stack.bank_width_bits));
    }
    ladder().validate();
}

LadderConfig ScenarioConfig::ladder() const {
    LadderConfig lc;
    lc.workload = workload;
    lc.stack = stack;
    lc.gamma_short = decode.gamma_short;
    lc.gamma_long = decode.gamma_long;
    lc.steps = decode.steps;
    lc.vocab = decode.vocab;
    lc.dim = decode.dim;
    lc.layers = decode.layers;
    lc.heads = decode.heads;
    lc.max_context = decode.max_context;
    lc.dlm_epsilon = decode.dlm_epsilon;
    lc.prompt_len = decode.prompt_len;
    lc.wdos_detail = decode.wdos_detail;
    return lc;
}

Mat load_matrix_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open matrix file: " + path);
    int rows = 0, cols = 0;
    if (!(in >> rows >> cols) || rows < 1 || cols < 1) {
        throw ValueError(path + ": first line must be 'rows cols'");
    }
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (!(in >> m.at(r, c))) {
                throw ValueError(path + ": missing value at row " + std::to_string(r) +
                                 ", col " + std::to_string(c));
            }
        }
    }
    return m;
}

}  // namespace sdsim
