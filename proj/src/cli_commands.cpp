#include "sdsim/cli_commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "sdsim/bvq.hpp"
#include "sdsim/quant.hpp"
#include "sdsim/rng.hpp"
#include "sdsim/scenario.hpp"
#include "sdsim/simkernel.hpp"
#include "sdsim/toylm.hpp"

namespace sdsim {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

ScenarioConfig load_config(const CliOptions& opts) {
    if (opts.config_path.empty()) {
        throw ConfigError("missing --config <path>");
    }
    ScenarioConfig cfg = ScenarioConfig::load(opts.config_path);
    if (!opts.out_dir.empty()) cfg.output.dir = opts.out_dir;
    if (!opts.format.empty()) {
        if (opts.format != "csv" && opts.format != "json") {
            throw ConfigError("--format must be csv or json");
        }
        cfg.output.format = opts.format;
    }
    if (opts.seed.has_value()) {
        cfg.seeds = {*opts.seed};
        cfg.bvq.config.seed = *opts.seed;
    }
    return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("failed while writing " + path.string());
}

// Timestamps live only here, never in the reports themselves.
void write_sidecar(const fs::path& report_path) {
    auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count();
    json meta;
    meta["report"] = report_path.filename().string();
    meta["written_unix_ms"] = now;
    write_file(report_path.string() + ".meta.json", meta.dump(2) + "\n");
}

// Digest of the scientific content; output paths and formats are excluded
// so overriding --out does not change report bytes.
std::string config_digest(const ScenarioConfig& cfg) {
    nlohmann::json j = cfg.to_json();
    j.erase("output");
    std::string dump = j.dump();
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void emit_report(const ScenarioConfig& cfg, const std::string& stem, const json& j,
                 const std::string& csv, std::ostream& log) {
    fs::path dir(cfg.output.dir);
    if (cfg.output.format == "json" || cfg.output.format == "both") {
        fs::path p = dir / (stem + ".json");
        write_file(p, j.dump(2) + "\n");
        write_sidecar(p);
        log << "wrote " << p.string() << "\n";
    }
    if (cfg.output.format == "csv" || cfg.output.format == "both") {
        fs::path p = dir / (stem + ".csv");
        write_file(p, csv);
        write_sidecar(p);
        log << "wrote " << p.string() << "\n";
    }
}

HadamardRegistry load_registry(const ScenarioConfig& cfg) {
    HadamardRegistry reg;
    for (const auto& f : cfg.rotation.matrix_files) {
        reg.load_file(f);
    }
    return reg;
}

}  // namespace

int cmd_rotate_eval(const CliOptions& opts, std::ostream& log) {
    ScenarioConfig cfg = load_config(opts);
    HadamardRegistry registry = load_registry(cfg);

    RotationPlan plan =
        search_plan(cfg.rotation.n, cfg.rotation.depth_cap, cfg.rotation.orders, &registry);
    log << plan.to_string() << "\n";

    uint64_t base_seed = cfg.seeds[0];

    // Computational invariance and norm preservation on the configured n.
    double max_invariance = 0.0;
    double max_norm_drift = 0.0;
    {
        Rng rng(base_seed);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> x(cfg.rotation.n);
            for (auto& v : x) v = rng.normal();
            Mat w(cfg.rotation.n, 16);
            for (auto& v : w.a) v = rng.normal();
            auto exact = vec_mat(x, w);
            auto xr = rotate_activation(x, plan, &registry);
            Mat wf = fold_weights(w, plan, &registry);
            auto approx = vec_mat(xr, wf);
            double num = 0.0, den = 0.0;
            for (size_t i = 0; i < exact.size(); ++i) {
                num += (approx[i] - exact[i]) * (approx[i] - exact[i]);
                den += exact[i] * exact[i];
            }
            max_invariance = std::max(max_invariance, std::sqrt(num / den));
            max_norm_drift =
                std::max(max_norm_drift, std::abs(norm2(xr) - norm2(x)) / norm2(x));
        }
    }

    // W4A8 error with and without rotation on heavy-tailed activations.
    RotationPlan quant_plan =
        search_plan(cfg.quant_eval.n, cfg.rotation.depth_cap, cfg.rotation.orders, &registry);
    int wins = 0;
    double sum_plain = 0.0, sum_rot = 0.0;
    {
        Rng rng(base_seed ^ 0x517cc1b727220a95ull);
        for (int t = 0; t < cfg.quant_eval.trials; ++t) {
            Mat w(cfg.quant_eval.n, cfg.quant_eval.weight_cols);
            for (auto& v : w.a) v = rng.normal();
            double pe = 0, px = 0, re = 0, rx = 0;
            for (int tok = 0; tok < cfg.quant_eval.tokens_per_trial; ++tok) {
                std::vector<double> x(cfg.quant_eval.n);
                for (auto& v : x) v = rng.normal();
                int pos = rng.uniform_int(0, cfg.quant_eval.n - 1);
                x[pos] *= rng.uniform(cfg.quant_eval.outlier_min, cfg.quant_eval.outlier_max);
                auto plain = w4a8_matmul_error(x, w, nullptr, &registry);
                auto rot = w4a8_matmul_error(x, w, &quant_plan, &registry);
                pe += plain.error_norm * plain.error_norm;
                px += plain.exact_norm * plain.exact_norm;
                re += rot.error_norm * rot.error_norm;
                rx += rot.exact_norm * rot.exact_norm;
            }
            double plain_rel = std::sqrt(pe / px);
            double rot_rel = std::sqrt(re / rx);
            sum_plain += plain_rel;
            sum_rot += rot_rel;
            if (rot_rel < plain_rel) ++wins;
        }
    }

    bool invariance_ok = max_invariance <= 1e-10;
    bool norm_ok = max_norm_drift <= 1e-12;
    int wins_needed = (cfg.quant_eval.trials * 95 + 99) / 100;
    bool rotation_benefit_ok = wins >= wins_needed;
    bool all_ok = invariance_ok && norm_ok && rotation_benefit_ok;

    json rep;
    rep["config_digest"] = config_digest(cfg);
    rep["plan"] = plan.to_string();
    rep["quant_plan"] = quant_plan.to_string();
    rep["invariance_max_rel"] = max_invariance;
    rep["norm_drift_max_rel"] = max_norm_drift;
    rep["w4a8"] = {{"trials", cfg.quant_eval.trials},
                   {"rotation_wins", wins},
                   {"wins_needed", wins_needed},
                   {"mean_rel_error_plain", sum_plain / cfg.quant_eval.trials},
                   {"mean_rel_error_rotated", sum_rot / cfg.quant_eval.trials}};
    rep["checks"] = {{"invariance", invariance_ok},
                     {"norm_preservation", norm_ok},
                     {"rotation_benefit", rotation_benefit_ok}};
    rep["pass"] = all_ok;

    std::string csv = "key,value\n";
    csv += "plan,\"" + plan.to_string() + "\"\n";
    csv += "invariance_max_rel," + fmt_g(max_invariance) + "\n";
    csv += "norm_drift_max_rel," + fmt_g(max_norm_drift) + "\n";
    csv += "rotation_wins," + std::to_string(wins) + "\n";
    csv += "trials," + std::to_string(cfg.quant_eval.trials) + "\n";
    csv += "mean_rel_error_plain," + fmt_g(sum_plain / cfg.quant_eval.trials) + "\n";
    csv += "mean_rel_error_rotated," + fmt_g(sum_rot / cfg.quant_eval.trials) + "\n";
    csv += std::string("pass,") + (all_ok ? "true" : "false") + "\n";

    emit_report(cfg, "rotate_eval", rep, csv, log);
    log << (all_ok ? "rotate-eval: PASS" : "rotate-eval: FAIL") << "\n";
    return all_ok ? kExitOk : kExitCorrectness;
}

int cmd_bvq_train(const CliOptions& opts, std::ostream& log) {
    ScenarioConfig cfg = load_config(opts);

    Mat w;
    if (!cfg.bvq.weights_file.empty()) {
        w = load_matrix_text(cfg.bvq.weights_file);
    } else {
        w = planted_prototype_weights(cfg.bvq.rows, cfg.bvq.cols, cfg.bvq.config,
                                      cfg.bvq.num_prototypes, cfg.bvq.noise,
                                      cfg.bvq.config.seed ^ 0xda7a5eedull);
    }

    BlockPartition part = partition_blocks(w, cfg.bvq.config);
    BvqModel init = kmeans_init(part, cfg.bvq.config);
    double mse_init = reconstruction_mse(init, w);
    BvqModel model = gumbel_refine(init, w, cfg.bvq.config);
    double mse_final = reconstruction_mse(model, w);
    double mse_direct = direct_int4_mse(w);
    CompressionReport comp = compression_report(model, 16);

    auto bytes = serialize_bvq(model);
    fs::path model_path = fs::path(cfg.output.dir) / "bvq_model.bin";
    write_file(model_path, std::string(bytes.begin(), bytes.end()));
    log << "wrote " << model_path.string() << " (" << bytes.size() << " bytes)\n";

    bool pass = mse_final <= mse_direct;

    json rep;
    rep["config_digest"] = config_digest(cfg);
    rep["matrix"] = {{"rows", w.rows}, {"cols", w.cols}};
    rep["mse_kmeans_init"] = mse_init;
    rep["mse_final"] = mse_final;
    rep["mse_direct_int4"] = mse_direct;
    rep["compression"] = {{"elements", comp.elements},
                          {"original_bits", comp.original_bits},
                          {"codebook_bits", comp.codebook_bits},
                          {"index_bits", comp.index_bits},
                          {"scale_bits", comp.scale_bits},
                          {"ratio", comp.ratio}};
    rep["model_file"] = model_path.filename().string();
    rep["model_bytes"] = bytes.size();
    rep["pass"] = pass;

    std::string csv = "key,value\n";
    csv += "mse_kmeans_init," + fmt_g(mse_init) + "\n";
    csv += "mse_final," + fmt_g(mse_final) + "\n";
    csv += "mse_direct_int4," + fmt_g(mse_direct) + "\n";
    csv += "compression_ratio," + fmt_g(comp.ratio) + "\n";
    csv += "model_bytes," + std::to_string(bytes.size()) + "\n";
    csv += std::string("pass,") + (pass ? "true" : "false") + "\n";

    emit_report(cfg, "bvq_train", rep, csv, log);
    log << (pass ? "bvq-train: PASS" : "bvq-train: FAIL") << "\n";
    return pass ? kExitOk : kExitCorrectness;
}

int cmd_simulate(const CliOptions& opts, std::ostream& log) {
    ScenarioConfig cfg = load_config(opts);
    LadderConfig ladder = cfg.ladder();
    LadderReport rep = compare_policies(ladder, cfg.seeds);

    json j;
    j["config_digest"] = config_digest(cfg);
    j["equivalence_ok"] = rep.equivalence_ok;
    j["rungs"] = json::array();
    for (int ri = 0; ri < kLadderRungs; ++ri) {
        j["rungs"].push_back({{"name", ladder_rungs()[ri].name},
                              {"geo_speedup_vs_first", rep.geo_speedup_vs_first[ri]},
                              {"geo_speedup_vs_prev", rep.geo_speedup_vs_prev[ri]}});
    }
    j["geo_energy_ratio_last_vs_first"] = rep.geo_energy_ratio_last_vs_first;
    j["mean_rejection_reduction_pp"] = rep.mean_rejection_reduction_pp;
    j["per_seed"] = json::array();
    for (const auto& row : rep.rows) {
        json r;
        r["seed"] = row.seed;
        r["equivalence_ok"] = row.equivalence_ok;
        r["apsd_rejected_ratio"] = row.apsd_rejected_ratio;
        r["parallel_rejected_ratio"] = row.parallel_rejected_ratio;
        for (int ri = 0; ri < kLadderRungs; ++ri) {
            r[ladder_rungs()[ri].name] = {
                {"decode_seconds", row.reports[ri].decode_seconds},
                {"tokens_per_s", row.reports[ri].tokens_per_s},
                {"mj_per_token", row.reports[ri].mj_per_token},
                {"speedup_vs_first", row.speedup_vs_first[ri]}};
        }
        j["per_seed"].push_back(std::move(r));
    }

    std::string csv =
        "seed,rung,decode_seconds,tokens_per_s,mj_per_token,speedup_vs_first\n";
    for (const auto& row : rep.rows) {
        for (int ri = 0; ri < kLadderRungs; ++ri) {
            csv += std::to_string(row.seed) + "," + ladder_rungs()[ri].name + "," +
                   fmt_g(row.reports[ri].decode_seconds) + "," +
                   fmt_g(row.reports[ri].tokens_per_s) + "," +
                   fmt_g(row.reports[ri].mj_per_token) + "," +
                   fmt_g(row.speedup_vs_first[ri]) + "\n";
        }
    }
    for (int ri = 0; ri < kLadderRungs; ++ri) {
        csv += std::string("geomean,") + ladder_rungs()[ri].name + ",,,," +
               fmt_g(rep.geo_speedup_vs_first[ri]) + "\n";
    }

    emit_report(cfg, "simulate", j, csv, log);

    // The adaptive-policy trace of the first seed, as JSON lines.
    {
        ToyLm tlm(cfg.seeds[0], cfg.decode.vocab, cfg.decode.dim, cfg.decode.layers,
                  cfg.decode.heads, cfg.decode.max_context);
        ToyLm dlm = tlm.perturbed(cfg.seeds[0] ^ 0x5bd1e995u, cfg.decode.dlm_epsilon);
        Rng prompt_rng(cfg.seeds[0] ^ 0x9e3779b9u);
        std::vector<int> prompt(cfg.decode.prompt_len);
        for (auto& t : prompt) t = prompt_rng.uniform_int(0, cfg.decode.vocab - 1);
        DecodeTrace tr = decode_apsd(tlm, dlm, prompt, cfg.decode.steps, cfg.decode.gamma_short,
                                     cfg.decode.gamma_long);
        fs::path p = fs::path(cfg.output.dir) / "trace_apsd.jsonl";
        write_file(p, tr.to_jsonl());
        write_sidecar(p);
        log << "wrote " << p.string() << "\n";
    }

    for (int ri = 0; ri < kLadderRungs; ++ri) {
        log << ladder_rungs()[ri].name << ": x" << fmt_g(rep.geo_speedup_vs_first[ri])
            << " vs bf16_sd\n";
    }
    log << "rejection reduction: " << fmt_g(rep.mean_rejection_reduction_pp) << " pp\n";
    if (!rep.equivalence_ok) {
        log << "simulate: FAIL (policy output diverged from autoregressive decoding)\n";
        return kExitCorrectness;
    }
    log << "simulate: PASS\n";
    return kExitOk;
}

namespace {

struct SuiteResult {
    std::string name;
    bool pass;
    std::string detail;
};

void run_verify_suites(const std::string& inject_fault, std::vector<SuiteResult>& out) {
    {  // Hadamard exactness
        bool ok = true;
        std::string detail;
        for (int k = 0; k <= 6 && ok; ++k) {
            HadamardMatrix h = construct_sylvester(k);
            if (inject_fault == "hadamard-sign" && k == 6) h.corrupt_entry(0, 0);
            if (!h.is_orthogonal()) {
                ok = false;
                detail = "order " + std::to_string(1 << k) + " failed H*H^T = n*I";
            }
        }
        for (int m : {12, 20, 28}) {
            if (!ok) break;
            if (!construct_npt(m).is_orthogonal()) {
                ok = false;
                detail = "order " + std::to_string(m) + " failed H*H^T = n*I";
            }
        }
        out.push_back({"hadamard_orthogonality", ok, ok ? "orders 1..64,12,20,28" : detail});
    }
    {  // rotation invariance
        bool ok = true;
        double worst = 0.0;
        Rng rng(11);
        for (int n : {448, 768, 1024}) {
            RotationPlan plan = search_plan(n, 6, {1, 12, 20, 28});
            for (int t = 0; t < 5; ++t) {
                std::vector<double> x(n);
                for (auto& v : x) v = rng.normal();
                Mat w(n, 8);
                for (auto& v : w.a) v = rng.normal();
                auto exact = vec_mat(x, w);
                auto approx = vec_mat(rotate_activation(x, plan), fold_weights(w, plan));
                double num = 0, den = 0;
                for (size_t i = 0; i < exact.size(); ++i) {
                    num += (approx[i] - exact[i]) * (approx[i] - exact[i]);
                    den += exact[i] * exact[i];
                }
                worst = std::max(worst, std::sqrt(num / den));
            }
        }
        ok = worst <= 1e-10;
        out.push_back({"rotation_invariance", ok, "max rel " + fmt_g(worst)});
    }
    {  // quantizer round trip
        bool ok = true;
        Rng rng(13);
        Mat x(8, 256);
        for (auto& v : x.a) v = rng.normal() * 5;
        QuantizedTensor qa = quantize_act_int8(x);
        for (int r = 0; r < x.rows && ok; ++r) {
            for (int c = 0; c < x.cols; ++c) {
                if (std::abs(qa.dequant(r, c) - x.at(r, c)) > qa.scales[r] / 2 + 1e-12) {
                    ok = false;
                    break;
                }
            }
        }
        Mat w(128, 16);
        for (auto& v : w.a) v = rng.normal();
        QuantizedTensor qw = quantize_w4(w);
        for (int c = 0; c < w.cols && ok; ++c) {
            for (int r = 0; r < w.rows; ++r) {
                if (std::abs(qw.dequant(r, c) - w.at(r, c)) > qw.scales[c] / 2 + 1e-12) {
                    ok = false;
                    break;
                }
            }
        }
        out.push_back({"quantizer_round_trip", ok, "int8 and int4 bounds"});
    }
    {  // tile fusion halving
        StackConfig stack;
        CbLayout layout;
        layout.entry_bits = 2048;
        layout.num_entries = 32;
        FetchTrace trace;
        for (int e = 0; e < 32; ++e) {
            trace.accesses.push_back({2 * e, e});
            trace.accesses.push_back({2 * e + 1, e});
        }
        auto res = fused_fetch_cycles(trace, layout, stack);
        bool ok = res.fused_cycles * 2 == res.naive_cycles;
        out.push_back({"tile_fusion_halving", ok,
                       std::to_string(res.fused_cycles) + " vs " +
                           std::to_string(res.naive_cycles) + " cycles"});
    }
    {  // bandwidth identities
        StackConfig one;
        StackConfig four;
        four.chips = 4;
        CbLayout cilm;
        cilm.cilm = true;
        bool ok = one.reram_peak_bandwidth() == 25.6e9 && cilm_bandwidth(cilm, four) == 102.4e9;
        out.push_back({"bandwidth_identities", ok, "25.6 GB/s and 102.4 GB/s"});
    }
    {  // scheduler happens-before + deadlock detection
        bool ok = true;
        std::string detail = "200 acyclic + 50 cyclic programs";
        Rng rng(17);
        for (int t = 0; t < 200 && ok; ++t) {
            Program prog;
            std::array<int, kNumQueues> emitted{};
            int n = rng.uniform_int(1, 24);
            for (int i = 0; i < n; ++i) {
                Queue q = static_cast<Queue>(rng.uniform_int(0, kNumQueues - 1));
                std::vector<ParentThreshold> parents;
                for (int p = rng.uniform_int(0, 2); p > 0; --p) {
                    Queue pq = static_cast<Queue>(rng.uniform_int(0, kNumQueues - 1));
                    if (emitted[static_cast<int>(pq)] == 0) continue;
                    parents.push_back({pq, rng.uniform_int(1, emitted[static_cast<int>(pq)])});
                }
                prog.add(q, rng.uniform_int(1, 15), std::move(parents));
                emitted[static_cast<int>(q)]++;
            }
            Scheduler s{prog};
            Schedule ooo = s.run();
            Schedule serial = s.run_in_order();
            if (ooo.makespan > serial.makespan || serial.makespan != prog.total_duration()) {
                ok = false;
                detail = "makespan bound violated";
            }
        }
        for (int t = 0; t < 50 && ok; ++t) {
            Program prog;
            prog.add(Queue::compute, rng.uniform_int(1, 9), {{Queue::emac, 1}});
            prog.add(Queue::emac, rng.uniform_int(1, 9), {{Queue::compute, 1}});
            bool deadlocked = false;
            try {
                Scheduler(prog).run();
            } catch (const DeadlockError&) {
                deadlocked = true;
            }
            if (!deadlocked) {
                ok = false;
                detail = "cyclic program not detected";
            }
        }
        out.push_back({"scheduler_soundness", ok, detail});
    }
    {  // speculative decoding equivalence
        bool ok = true;
        Rng rng(23);
        for (int t = 0; t < 20 && ok; ++t) {
            ToyLm tlm = ToyLm::desk_default(rng.next_u64());
            ToyLm dlm = (t % 2 == 0) ? ToyLm::desk_default(rng.next_u64())
                                     : tlm.perturbed(rng.next_u64(), 0.005);
            std::vector<int> prompt(8);
            for (auto& tk : prompt) tk = rng.uniform_int(0, tlm.vocab() - 1);
            DecodeTrace ad = decode_ad(tlm, prompt, 24);
            ok = decode_sd(tlm, dlm, prompt, 24, 4).tokens == ad.tokens &&
                 decode_parallel_sd(tlm, dlm, prompt, 24, 6).tokens == ad.tokens &&
                 decode_apsd(tlm, dlm, prompt, 24, 2, 6).tokens == ad.tokens;
        }
        out.push_back({"sd_equivalence", ok, "20 model pairs, all policies"});
    }
    {  // bvq gradient check
        bool ok = true;
        double worst = 0.0;
        Rng rng(29);
        for (int t = 0; t < 5; ++t) {
            int nv = 3, ne = 2, dim = 2;
            std::vector<std::vector<double>> targets(nv, std::vector<double>(dim));
            std::vector<std::vector<double>> logits(nv, std::vector<double>(ne));
            std::vector<std::vector<double>> gumbel(nv, std::vector<double>(ne));
            std::vector<std::vector<double>> entries(ne, std::vector<double>(dim));
            for (auto& v : targets)
                for (auto& e : v) e = rng.uniform(-2, 2);
            for (auto& v : logits)
                for (auto& e : v) e = rng.uniform(-1, 1);
            for (auto& v : gumbel)
                for (auto& e : v) e = rng.uniform(-1, 1);
            for (auto& v : entries)
                for (auto& e : v) e = rng.uniform(-2, 2);
            SoftLossGrad g = soft_assignment_loss(targets, logits, gumbel, entries, 1.0);
            const double h = 1e-6;
            for (int v = 0; v < nv; ++v) {
                for (int e = 0; e < ne; ++e) {
                    auto lp = logits, lm = logits;
                    lp[v][e] += h;
                    lm[v][e] -= h;
                    double fd = (soft_assignment_loss(targets, lp, gumbel, entries, 1.0).loss -
                                 soft_assignment_loss(targets, lm, gumbel, entries, 1.0).loss) /
                                (2 * h);
                    double denom = std::max({std::abs(fd), std::abs(g.d_logits[v][e]), 1e-8});
                    worst = std::max(worst, std::abs(fd - g.d_logits[v][e]) / denom);
                }
            }
        }
        ok = worst <= 1e-4;
        out.push_back({"bvq_gradient", ok, "max rel " + fmt_g(worst)});
    }
}

}  // namespace

int cmd_verify(const CliOptions& opts, std::ostream& log) {
    std::vector<SuiteResult> results;
    run_verify_suites(opts.inject_fault, results);
    bool all = true;
    for (const auto& r : results) {
        log << r.name << ": " << (r.pass ? "PASS" : "FAIL") << " (" << r.detail << ")\n";
        all = all && r.pass;
    }
    log << (all ? "verify: all suites passed\n" : "verify: FAILURES present\n");
    return all ? kExitOk : kExitCorrectness;
}

int cmd_sweep(const CliOptions& opts, std::ostream& log) {
    ScenarioConfig base = load_config(opts);
    if (base.sweep.empty()) {
        throw ConfigError("sweep: config has no 'sweep' cases");
    }
    std::ifstream in(opts.config_path);
    if (!in) throw IoError("cannot open config file: " + opts.config_path);
    json base_json;
    in >> base_json;
    base_json.erase("sweep");

    json j;
    j["config_digest"] = config_digest(base);
    j["cases"] = json::array();
    std::string csv = "case,rung,geo_speedup_vs_first,equivalence_ok\n";
    bool all_ok = true;
    for (const auto& c : base.sweep) {
        json merged = base_json;
        merged.merge_patch(c.patch);
        ScenarioConfig cfg = ScenarioConfig::from_json(merged);
        if (!opts.out_dir.empty()) cfg.output.dir = opts.out_dir;
        if (opts.seed.has_value()) cfg.seeds = {*opts.seed};
        LadderReport rep = compare_policies(cfg.ladder(), cfg.seeds);
        all_ok = all_ok && rep.equivalence_ok;
        json cj;
        cj["name"] = c.name;
        cj["equivalence_ok"] = rep.equivalence_ok;
        for (int ri = 0; ri < kLadderRungs; ++ri) {
            cj[ladder_rungs()[ri].name] = rep.geo_speedup_vs_first[ri];
            csv += c.name + "," + ladder_rungs()[ri].name + "," +
                   fmt_g(rep.geo_speedup_vs_first[ri]) + "," +
                   (rep.equivalence_ok ? "true" : "false") + "\n";
        }
        j["cases"].push_back(std::move(cj));
        log << "case " << c.name << ": ladder x" << fmt_g(rep.geo_speedup_vs_first[3]) << "\n";
    }
    emit_report(base, "sweep", j, csv, log);
    if (!all_ok) {
        log << "sweep: FAIL (equivalence violation)\n";
        return kExitCorrectness;
    }
    log << "sweep: PASS\n";
    return kExitOk;
}

int run_command_guarded(int (*cmd)(const CliOptions&, std::ostream&), const CliOptions& opts,
                        std::ostream& log) {
    try {
        return cmd(opts, log);
    } catch (const IoError& e) {
        log << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ConfigError& e) {
        log << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InfeasiblePlanError& e) {
        log << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const UnsupportedOrderError& e) {
        log << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ProgramError& e) {
        log << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DeadlockError& e) {
        log << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ValueError& e) {
        log << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const SizeError& e) {
        log << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ShapeError& e) {
        log << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        log << "internal error: " << e.what() << "\n";
        return kExitCorrectness;
    }
}

}  // namespace sdsim
