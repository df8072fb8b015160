// Acceptance suite: one line per criterion, nonzero exit on any failure.
// argv[1]: path to the simcli binary, argv[2]: path to the configs directory.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sdsim/bvq.hpp"
#include "sdsim/hadamard.hpp"
#include "sdsim/memmodel.hpp"
#include "sdsim/quant.hpp"
#include "sdsim/rng.hpp"
#include "sdsim/rotation.hpp"
#include "sdsim/simkernel.hpp"
#include "sdsim/specdec.hpp"
#include "sdsim/toylm.hpp"
#include "sdsim/wdos.hpp"

using namespace sdsim;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void report(int criterion, bool pass, const std::string& detail, double seconds) {
    std::printf("CRITERION %2d: %s  %s (%.2fs)\n", criterion, pass ? "PASS" : "FAIL",
                detail.c_str(), seconds);
    if (!pass) ++g_failures;
}

std::string simcli_path;
fs::path configs_dir;
fs::path work_dir;

int run_cli(const std::string& args) {
    std::string cmd = simcli_path + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    if (rc < 0) return -1;
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- criterion 1: Hadamard exactness -------------------------------------
void criterion_hadamard() {
    Timer t;
    bool ok = true;
    std::string detail = "H*H^T = n*I for orders 1,2,4,...,64 and 12,20,28";
    for (int k = 0; k <= 6; ++k) {
        if (!construct_sylvester(k).is_orthogonal()) {
            ok = false;
            detail = "power-of-two order " + std::to_string(1 << k) + " failed";
        }
    }
    for (int m : {12, 20, 28}) {
        if (!construct_npt(m).is_orthogonal()) {
            ok = false;
            detail = "npt order " + std::to_string(m) + " failed";
        }
    }
    double s = t.seconds();
    if (s >= 5.0) {
        ok = false;
        detail += " [exceeded 5s]";
    }
    report(1, ok, detail, s);
}

// --- criterion 2: computational invariance --------------------------------
void criterion_invariance() {
    Timer t;
    Rng rng(20260811);
    double worst = 0.0;
    int done = 0;
    for (int n : {448, 768, 1024}) {
        RotationPlan plan = search_plan(n, 6, {1, 12, 20, 28});
        int trials = n == 1024 ? 34 : 33;
        for (int i = 0; i < trials; ++i) {
            std::vector<double> x(n);
            for (auto& v : x) v = rng.normal();
            Mat w(n, 32);
            for (auto& v : w.a) v = rng.normal();
            auto exact = vec_mat(x, w);
            auto approx = vec_mat(rotate_activation(x, plan), fold_weights(w, plan));
            double num = 0, den = 0;
            for (size_t j = 0; j < exact.size(); ++j) {
                num += (approx[j] - exact[j]) * (approx[j] - exact[j]);
                den += exact[j] * exact[j];
            }
            worst = std::max(worst, std::sqrt(num / den));
            ++done;
        }
    }
    double s = t.seconds();
    bool ok = worst <= 1e-10 && done == 100 && s < 30.0;
    char buf[120];
    std::snprintf(buf, sizeof(buf), "100 triples at n in {448,768,1024}, max rel %.2e", worst);
    report(2, ok, buf, s);
}

// --- criterion 3: rotation benefit on heavy-tailed activations ------------
void criterion_rotation_benefit() {
    Timer t;
    int n = 2048;
    RotationPlan plan = search_plan(n, 6, {1, 12, 20, 28});
    Rng rng(2024);
    int wins = 0;
    const int trials = 100;
    const int tokens = 8;
    for (int trial = 0; trial < trials; ++trial) {
        Mat w(n, 64);
        for (auto& v : w.a) v = rng.normal();
        double pe = 0, px = 0, re = 0, rx = 0;
        for (int tok = 0; tok < tokens; ++tok) {
            std::vector<double> x(n);
            for (auto& v : x) v = rng.normal();
            x[rng.uniform_int(0, n - 1)] *= rng.uniform(50.0, 200.0);
            auto plain = w4a8_matmul_error(x, w);
            auto rot = w4a8_matmul_error(x, w, &plan);
            pe += plain.error_norm * plain.error_norm;
            px += plain.exact_norm * plain.exact_norm;
            re += rot.error_norm * rot.error_norm;
            rx += rot.exact_norm * rot.exact_norm;
        }
        if (re / rx < pe / px) ++wins;
    }
    report(3, wins >= 95,
           "rotation lowered W4A8 error in " + std::to_string(wins) + "/100 trials",
           t.seconds());
}

// --- criterion 4: tile-fusion halving -------------------------------------
void criterion_fusion_halving() {
    Timer t;
    StackConfig stack;
    bool ok = true;
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        CbLayout layout;
        layout.entry_bits = 128 << rng.uniform_int(0, 6);
        layout.num_entries = rng.uniform_int(1, 64);
        layout.mode = trial % 2 == 0 ? CbMapping::vertical : CbMapping::horizontal;
        FetchTrace trace;
        for (int e = 0; e < layout.num_entries; ++e) {
            trace.accesses.push_back({2 * e, e});
            trace.accesses.push_back({2 * e + 1, e});
        }
        auto res = fused_fetch_cycles(trace, layout, stack);
        if (res.fused_cycles * 2 != res.naive_cycles) ok = false;
    }
    report(4, ok, "fused cycles exactly half of naive on twice-referenced traces",
           t.seconds());
}

// --- criterion 5: bandwidth identities -------------------------------------
void criterion_bandwidth() {
    Timer t;
    StackConfig one;
    StackConfig four;
    four.chips = 4;
    CbLayout cilm;
    cilm.cilm = true;
    bool ok = one.reram_peak_bandwidth() == 25.6e9 &&
              cilm_bandwidth(cilm, four) == 102.4e9 &&
              one.total_capacity_bytes() == 8 * 1024 * 1024 &&
              four.total_capacity_bytes() == 32 * 1024 * 1024;
    report(5, ok, "25.6 GB/s per chip, 102.4 GB/s at 4 chips, 8/32 MiB", t.seconds());
}

// --- criterion 6: decoding equivalence -------------------------------------
void criterion_equivalence() {
    Timer t;
    Rng rng(6);
    int mismatches = 0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
        ToyLm tlm = ToyLm::desk_default(rng.next_u64());
        ToyLm dlm = (trial % 3 == 0) ? ToyLm::desk_default(rng.next_u64())
                                     : tlm.perturbed(rng.next_u64(), 0.002 + 0.002 * (trial % 5));
        std::vector<int> prompt(6 + trial % 6);
        for (auto& tk : prompt) tk = rng.uniform_int(0, tlm.vocab() - 1);
        int steps = 24 + trial % 9;
        DecodeTrace ad = decode_ad(tlm, prompt, steps);
        if (decode_sd(tlm, dlm, prompt, steps, 1 + trial % 6).tokens != ad.tokens) ++mismatches;
        if (decode_parallel_sd(tlm, dlm, prompt, steps, 2 + trial % 5).tokens != ad.tokens) {
            ++mismatches;
        }
        if (decode_apsd(tlm, dlm, prompt, steps, 2, 2 + trial % 7).tokens != ad.tokens) {
            ++mismatches;
        }
    }
    double s = t.seconds();
    bool ok = mismatches == 0 && s < 120.0;
    report(6, ok,
           "100 model pairs x all policies, " + std::to_string(mismatches) + " mismatches",
           s);
}

// --- criterion 7: scheduler soundness --------------------------------------
void criterion_wdos() {
    Timer t;
    Rng rng(7);
    bool ok = true;
    std::string detail = "1000 acyclic + strictness + 200 cyclic";

    auto schedule_valid = [](const Program& prog, const Schedule& sched) {
        for (int qi = 0; qi < kNumQueues; ++qi) {
            const auto& list = prog.queue(static_cast<Queue>(qi));
            for (size_t i = 1; i < list.size(); ++i) {
                if (sched.find(list[i - 1].id)->complete > sched.find(list[i].id)->issue) {
                    return false;
                }
            }
            for (const auto& ins : list) {
                const auto* e = sched.find(ins.id);
                if (e->complete != e->issue + ins.duration) return false;
                for (const auto& p : ins.parents) {
                    std::vector<int64_t> completions;
                    for (const auto& pi : prog.queue(p.queue)) {
                        completions.push_back(sched.find(pi.id)->complete);
                    }
                    std::sort(completions.begin(), completions.end());
                    if (completions[p.count - 1] > e->issue) return false;
                }
            }
        }
        return true;
    };

    for (int trial = 0; trial < 1000 && ok; ++trial) {
        Program prog;
        std::array<int, kNumQueues> emitted{};
        int n = rng.uniform_int(1, 40);
        for (int i = 0; i < n; ++i) {
            Queue q = static_cast<Queue>(rng.uniform_int(0, kNumQueues - 1));
            std::vector<ParentThreshold> parents;
            for (int p = rng.uniform_int(0, 2); p > 0; --p) {
                Queue pq = static_cast<Queue>(rng.uniform_int(0, kNumQueues - 1));
                if (emitted[static_cast<int>(pq)] == 0) continue;
                parents.push_back({pq, rng.uniform_int(1, emitted[static_cast<int>(pq)])});
            }
            prog.add(q, rng.uniform_int(1, 25), std::move(parents));
            emitted[static_cast<int>(q)]++;
        }
        Scheduler s{prog};
        try {
            Schedule ooo = s.run();
            Schedule serial = s.run_in_order();
            if (!schedule_valid(prog, ooo) || !schedule_valid(prog, serial)) {
                ok = false;
                detail = "happens-before violated";
            }
            if (ooo.makespan > serial.makespan) {
                ok = false;
                detail = "out-of-order slower than serial";
            }
            if (serial.makespan != prog.total_duration()) {
                ok = false;
                detail = "serial makespan wrong";
            }
        } catch (const DeadlockError&) {
            ok = false;
            detail = "false deadlock on a feasible program";
        }
    }
    // Strictly faster whenever two queues hold independent work.
    for (int trial = 0; trial < 200 && ok; ++trial) {
        Program prog;
        Queue a = static_cast<Queue>(rng.uniform_int(0, kNumQueues - 1));
        Queue b = a;
        while (b == a) b = static_cast<Queue>(rng.uniform_int(0, kNumQueues - 1));
        for (int i = rng.uniform_int(1, 6); i > 0; --i) prog.add(a, rng.uniform_int(1, 12));
        for (int i = rng.uniform_int(1, 6); i > 0; --i) prog.add(b, rng.uniform_int(1, 12));
        Scheduler s{prog};
        if (s.run().makespan >= s.run_in_order().makespan) {
            ok = false;
            detail = "no strict speedup with independent queues";
        }
    }
    for (int trial = 0; trial < 200 && ok; ++trial) {
        Program prog;
        Queue a = static_cast<Queue>(rng.uniform_int(0, 1));
        Queue b = static_cast<Queue>(rng.uniform_int(2, 3));
        prog.add(a, rng.uniform_int(1, 9), {{b, 1}});
        prog.add(b, rng.uniform_int(1, 9), {{a, 1}});
        for (int i = rng.uniform_int(0, 4); i > 0; --i) {
            prog.add(static_cast<Queue>(rng.uniform_int(0, 3)), rng.uniform_int(1, 9),
                     {{a, 1}});
        }
        bool flagged = false;
        try {
            Scheduler(prog).run();
        } catch (const DeadlockError&) {
            flagged = true;
        }
        if (!flagged) {
            ok = false;
            detail = "cyclic program not flagged";
        }
    }
    report(7, ok, detail, t.seconds());
}

// --- criterion 8: BVQ gradient check ---------------------------------------
void criterion_bvq_gradient() {
    Timer t;
    Rng rng(8);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        int nv = 2 + trial % 4;
        int ne = 2 + trial % 3;
        int dim = 2 + trial % 2;
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
        auto rel = [](double a, double b) {
            return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
        };
        for (int v = 0; v < nv; ++v) {
            for (int e = 0; e < ne; ++e) {
                auto lp = logits, lm = logits;
                lp[v][e] += h;
                lm[v][e] -= h;
                double fd = (soft_assignment_loss(targets, lp, gumbel, entries, 1.0).loss -
                             soft_assignment_loss(targets, lm, gumbel, entries, 1.0).loss) /
                            (2 * h);
                worst = std::max(worst, rel(fd, g.d_logits[v][e]));
            }
        }
        for (int e = 0; e < ne; ++e) {
            for (int d = 0; d < dim; ++d) {
                auto ep = entries, em = entries;
                ep[e][d] += h;
                em[e][d] -= h;
                double fd = (soft_assignment_loss(targets, logits, gumbel, ep, 1.0).loss -
                             soft_assignment_loss(targets, logits, gumbel, em, 1.0).loss) /
                            (2 * h);
                worst = std::max(worst, rel(fd, g.d_entries[e][d]));
            }
        }
    }
    char buf[120];
    std::snprintf(buf, sizeof(buf), "20 instances, max rel gradient error %.2e", worst);
    report(8, worst <= 1e-4, buf, t.seconds());
}

// --- criterion 9: BVQ beats direct int4 on planted data ---------------------
void criterion_bvq_quality() {
    Timer t;
    BvqConfig cfg;
    cfg.codebook_entries = 4;
    cfg.refine_steps = 60;
    int wins = 0;
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        cfg.seed = seed;
        Mat w = planted_prototype_weights(32, 64, cfg, 4, 0.02, seed * 1001 + 7);
        BlockPartition part = partition_blocks(w, cfg);
        BvqModel model = gumbel_refine(kmeans_init(part, cfg), w, cfg);
        if (reconstruction_mse(model, w) <= direct_int4_mse(w)) ++wins;
    }
    report(9, wins == 20, "final MSE <= direct int4 MSE in " + std::to_string(wins) + "/20 seeds",
           t.seconds());
}

// --- criteria 10 and 11: calibrated bands from the CLI defaults -------------
void criteria_bands_and_rejection() {
    Timer t;
    fs::path out = work_dir / "bands";
    int rc = run_cli("simulate --config " + (configs_dir / "default.json").string() + " --out " +
                     out.string());
    double s = t.seconds();
    if (rc != 0) {
        report(10, false, "cmd_simulate exited with code " + std::to_string(rc), s);
        report(11, false, "cmd_simulate exited with code " + std::to_string(rc), 0.0);
        return;
    }
    nlohmann::json rep = nlohmann::json::parse(slurp(out / "simulate.json"));
    double a = rep["rungs"][1]["geo_speedup_vs_prev"].get<double>();
    double b = rep["rungs"][2]["geo_speedup_vs_prev"].get<double>();
    double c = rep["rungs"][3]["geo_speedup_vs_prev"].get<double>();
    double d = rep["rungs"][3]["geo_speedup_vs_first"].get<double>();
    bool ok10 = a >= 3.4 && a <= 4.2 && b >= 1.05 && b <= 1.6 && c >= 1.05 && c <= 1.4 &&
                d >= 3.5 && d <= 9.0 && s < 60.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "w4a8 x%.2f, bvq x%.2f, apsd x%.2f, ladder x%.2f", a, b, c,
                  d);
    report(10, ok10, buf, s);

    Timer t11;
    double reduction = rep["mean_rejection_reduction_pp"].get<double>();
    bool strict = true;
    for (const auto& row : rep["per_seed"]) {
        if (!(row["apsd_rejected_ratio"].get<double>() <
              row["parallel_rejected_ratio"].get<double>())) {
            strict = false;
        }
    }
    bool ok11 = strict && reduction >= 5.0;
    std::snprintf(buf, sizeof(buf),
                  "rejected-token ratio reduction %.1f pp, strictly lower on every seed%s",
                  reduction, strict ? "" : " [NOT strict]");
    report(11, ok11, buf, t11.seconds());
}

// --- criterion 12: CLI determinism ------------------------------------------
void criterion_determinism() {
    Timer t;
    bool ok = true;
    std::string detail = "byte-identical reports across reruns";
    struct Case {
        const char* name;
        std::string args;
        std::vector<std::string> files;
    };
    std::string def = (configs_dir / "default.json").string();
    std::string sweep = (configs_dir / "sweep_demo.json").string();
    std::vector<Case> cases = {
        {"simulate", "simulate --config " + def,
         {"simulate.json", "simulate.csv", "trace_apsd.jsonl"}},
        {"rotate-eval", "rotate-eval --config " + def, {"rotate_eval.json", "rotate_eval.csv"}},
        {"bvq-train", "bvq-train --config " + def + " --seed 9",
         {"bvq_train.json", "bvq_train.csv", "bvq_model.bin"}},
        {"sweep", "sweep --config " + sweep, {"sweep.csv"}},
    };
    for (const auto& c : cases) {
        fs::path out_a = work_dir / (std::string("det_a_") + c.name);
        fs::path out_b = work_dir / (std::string("det_b_") + c.name);
        int rc_a = run_cli(c.args + " --out " + out_a.string());
        int rc_b = run_cli(c.args + " --out " + out_b.string());
        if (rc_a != 0 || rc_b != 0) {
            ok = false;
            detail = std::string(c.name) + " exited nonzero";
            break;
        }
        for (const auto& f : c.files) {
            if (slurp(out_a / f) != slurp(out_b / f)) {
                ok = false;
                detail = std::string(c.name) + "/" + f + " differs between runs";
            }
        }
    }
    report(12, ok, detail, t.seconds());
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: acceptance_tests <simcli path> <configs dir>\n");
        return 2;
    }
    simcli_path = argv[1];
    configs_dir = argv[2];
    work_dir = fs::temp_directory_path() / "sdsim_acceptance";
    fs::remove_all(work_dir);
    fs::create_directories(work_dir);

    criterion_hadamard();
    criterion_invariance();
    criterion_rotation_benefit();
    criterion_fusion_halving();
    criterion_bandwidth();
    criterion_equivalence();
    criterion_wdos();
    criterion_bvq_gradient();
    criterion_bvq_quality();
    criteria_bands_and_rejection();
    criterion_determinism();

    if (g_failures == 0) {
        std::printf("ACCEPTANCE: all criteria passed\n");
        return 0;
    }
    std::printf("ACCEPTANCE: %d criterion(s) FAILED\n", g_failures);
    return 1;
}
