#include "sdsim/simkernel.hpp"

#include <cmath>

#include "sdsim/rng.hpp"
#include "sdsim/toylm.hpp"

namespace sdsim {

const char* precision_name(TlmPrecision p) {
    return p == TlmPrecision::bf16 ? "bf16" : "w4a8";
}

const char* dlm_source_name(DlmSource s) {
    return s == DlmSource::dram_raw ? "dram" : "reram_bvq";
}

void WorkloadConfig::validate() const {
    for (double v : {tlm_bytes_bf16, tlm_bytes_w4a8, dlm_bytes_bf16, dlm_bytes_w4, dlm_bytes_bvq,
                     tlm_step_ops, dlm_step_ops, compute_throughput}) {
        if (!(v > 0)) throw ConfigError("workload: byte/op quantities must be positive");
    }
    if (prefill_tokens < 0) throw ConfigError("workload: prefill_tokens must be >= 0");
}

namespace {

double dlm_bandwidth(const WorkloadConfig& workload, const StackConfig& stack) {
    if (workload.dlm_source == DlmSource::reram_bvq) {
        CbLayout layout;
        layout.cilm = true;
        return cilm_bandwidth(layout, stack);
    }
    return stack.dram_bandwidth_bytes_per_s;
}

double dlm_pj_per_byte(const WorkloadConfig& workload, const StackConfig& stack) {
    return workload.dlm_source == DlmSource::reram_bvq ? stack.energy.reram_pj_per_byte
                                                       : stack.energy.dram_pj_per_byte;
}

// Verification passes the batch plus the bonus position through the model
// but streams the weights once.
double verify_latency(int positions, const WorkloadConfig& w, const StackConfig& stack) {
    double compute = positions * w.tlm_step_ops / w.compute_throughput;
    double memory = w.tlm_bytes() / stack.dram_bandwidth_bytes_per_s;
    return std::max(compute, memory);
}

}  // namespace

double step_latency(SimRole role, const WorkloadConfig& workload, const StackConfig& stack) {
    workload.validate();
    stack.validate();
    if (role == SimRole::tlm) {
        return verify_latency(1, workload, stack);
    }
    double compute = workload.dlm_step_ops / workload.compute_throughput;
    double memory = workload.dlm_bytes() / dlm_bandwidth(workload, stack);
    return std::max(compute, memory);
}

Program build_wdos_program(const DecodeTrace& trace, const WorkloadConfig& w,
                           const StackConfig& stack, double tick_seconds) {
    Program prog;
    auto ticks = [&](double seconds) {
        return std::max<int64_t>(1, static_cast<int64_t>(std::ceil(seconds / tick_seconds)));
    };
    Queue dlm_q = w.dlm_source == DlmSource::reram_bvq ? Queue::reram_load : Queue::emac;
    double dlm_load_s = w.dlm_bytes() / dlm_bandwidth(w, stack);
    double dlm_compute_s = w.dlm_step_ops / w.compute_throughput;
    double tlm_stream_s = w.tlm_bytes() / stack.dram_bandwidth_bytes_per_s;
    double tlm_compute_s = w.tlm_step_ops / w.compute_throughput;

    int64_t rounds_done = 0;
    int64_t dlm_loads = 0;   // completions in dlm_q so far
    int64_t emac_count = 0;  // completions in emac so far (streams, plus loads when shared)
    for (const auto& r : trace.rounds) {
        // Data-dependent work waits for the previous round's token broadcast.
        std::vector<ParentThreshold> gate;
        if (rounds_done > 0) gate.push_back({Queue::transceiver, rounds_done});

        int drafted = r.serial_draft_tokens + r.concurrent_draft_tokens;
        for (int i = 0; i < drafted; ++i) {
            prog.add(dlm_q, ticks(dlm_load_s), gate, "dlm_load");
            ++dlm_loads;
            if (dlm_q == Queue::emac) ++emac_count;
            prog.add(Queue::compute, ticks(dlm_compute_s), {{dlm_q, dlm_loads}}, "dlm_step");
        }
        // The verification overlaps its weight stream (roofline max): the
        // compute instruction and the emac stream run in parallel queues and
        // the round-closing broadcast waits for both.
        prog.add(Queue::emac, ticks(tlm_stream_s), {}, "tlm_stream");
        ++emac_count;
        prog.add(Queue::compute, ticks(r.tlm_positions * tlm_compute_s), gate, "tlm_verify");
        int64_t computes_so_far = dlm_loads + rounds_done + 1;
        prog.add(Queue::transceiver, 1,
                 {{Queue::compute, computes_so_far}, {Queue::emac, emac_count}}, "broadcast");
        ++rounds_done;
    }
    return prog;
}

SimReport simulate_run(const DecodeTrace& trace, const WorkloadConfig& workload,
                       const StackConfig& stack, bool wdos_detail) {
    workload.validate();
    stack.validate();
    SimReport rep;
    rep.used_wdos = wdos_detail;
    rep.rounds = static_cast<int64_t>(trace.rounds.size());
    rep.decode_tokens = static_cast<int>(trace.tokens.size()) - trace.prompt_len;

    double t_dlm = step_latency(SimRole::dlm, workload, stack);
    double dlm_pj = dlm_pj_per_byte(workload, stack);

    for (const auto& r : trace.rounds) {
        double verify_s = verify_latency(r.tlm_positions, workload, stack);
        double serial_s = r.serial_draft_tokens * t_dlm;
        double concurrent_s = r.concurrent_draft_tokens * t_dlm;
        rep.serial_draft_seconds += serial_s;
        rep.verify_seconds += verify_s;
        rep.hidden_draft_seconds += std::min(concurrent_s, verify_s);
        rep.exposed_draft_seconds += std::max(0.0, concurrent_s - verify_s);
        rep.decode_seconds += serial_s + std::max(concurrent_s, verify_s);

        int drafted = r.serial_draft_tokens + r.concurrent_draft_tokens;
        rep.decode_joules += workload.tlm_bytes() * stack.energy.dram_pj_per_byte * 1e-12;
        rep.decode_joules += drafted * workload.dlm_bytes() * dlm_pj * 1e-12;
        rep.decode_joules += (r.tlm_positions * workload.tlm_step_ops +
                              drafted * workload.dlm_step_ops) *
                             stack.energy.pj_per_mac * 1e-12;
    }

    if (wdos_detail && !trace.rounds.empty()) {
        Program prog = build_wdos_program(trace, workload, stack, kWdosTickSeconds);
        Schedule sched = Scheduler(prog).run();
        rep.decode_seconds = static_cast<double>(sched.makespan) * kWdosTickSeconds;
    }

    if (rep.decode_tokens > 0 && rep.decode_seconds > 0) {
        rep.tokens_per_s = rep.decode_tokens / rep.decode_seconds;
        rep.mj_per_token = rep.decode_joules * 1e3 / rep.decode_tokens;
    }

    // Prefill: one compute-bound batch pass over the prompt.
    double pf_compute = workload.prefill_tokens * workload.tlm_step_ops /
                        workload.compute_throughput;
    double pf_memory = workload.tlm_bytes() / stack.dram_bandwidth_bytes_per_s;
    rep.prefill_seconds = std::max(pf_compute, pf_memory);
    rep.prefill_joules =
        workload.tlm_bytes() * stack.energy.dram_pj_per_byte * 1e-12 +
        workload.prefill_tokens * workload.tlm_step_ops * stack.energy.pj_per_mac * 1e-12;
    return rep;
}

void LadderConfig::validate() const {
    workload.validate();
    stack.validate();
    SdPolicyConfig pc;
    pc.gamma_short = gamma_short;
    pc.gamma_long = gamma_long;
    pc.max_new_tokens = steps;
    pc.validate();
    if (vocab < 2 || dim < 1 || layers < 1 || heads < 1 || prompt_len < 1) {
        throw ConfigError("ladder: model dimensions must be positive");
    }
    if (prompt_len + steps > max_context) {
        throw ConfigError("ladder: prompt_len + steps exceeds max_context");
    }
}

const std::array<LadderRungSpec, kLadderRungs>& ladder_rungs() {
    static const std::array<LadderRungSpec, kLadderRungs> rungs = {{
        {"bf16_sd", TlmPrecision::bf16, DlmSource::dram_raw, SdPolicy::vanilla_sd},
        {"w4a8_sd", TlmPrecision::w4a8, DlmSource::dram_raw, SdPolicy::vanilla_sd},
        {"bvq_rspnm", TlmPrecision::w4a8, DlmSource::reram_bvq, SdPolicy::vanilla_sd},
        {"apsd", TlmPrecision::w4a8, DlmSource::reram_bvq, SdPolicy::apsd},
    }};
    return rungs;
}

LadderReport compare_policies(const LadderConfig& config, const std::vector<uint64_t>& seeds) {
    config.validate();
    if (seeds.empty()) throw ConfigError("compare_policies: need at least one seed");
    LadderReport report;
    std::array<double, kLadderRungs> log_speedup_sum{};
    double log_energy_sum = 0.0;
    double reduction_sum = 0.0;

    for (uint64_t seed : seeds) {
        ToyLm tlm(seed, config.vocab, config.dim, config.layers, config.heads,
                  config.max_context);
        ToyLm dlm = tlm.perturbed(seed ^ 0x5bd1e995u, config.dlm_epsilon);
        Rng prompt_rng(seed ^ 0x9e3779b9u);
        std::vector<int> prompt(config.prompt_len);
        for (auto& t : prompt) t = prompt_rng.uniform_int(0, config.vocab - 1);

        DecodeTrace ad = decode_ad(tlm, prompt, config.steps);
        DecodeTrace sd = decode_sd(tlm, dlm, prompt, config.steps, config.gamma_short);
        DecodeTrace par =
            decode_parallel_sd(tlm, dlm, prompt, config.steps, config.gamma_long);
        DecodeTrace ap =
            decode_apsd(tlm, dlm, prompt, config.steps, config.gamma_short, config.gamma_long);

        LadderSeedRow row;
        row.seed = seed;
        row.equivalence_ok =
            sd.tokens == ad.tokens && par.tokens == ad.tokens && ap.tokens == ad.tokens;

        for (int ri = 0; ri < kLadderRungs; ++ri) {
            const LadderRungSpec& spec = ladder_rungs()[ri];
            WorkloadConfig w = config.workload;
            w.precision = spec.precision;
            w.dlm_source = spec.dlm_source;
            const DecodeTrace& trace = spec.policy == SdPolicy::apsd ? ap : sd;
            row.reports[ri] = simulate_run(trace, w, config.stack, config.wdos_detail);
        }
        for (int ri = 0; ri < kLadderRungs; ++ri) {
            row.speedup_vs_first[ri] =
                row.reports[0].decode_seconds / row.reports[ri].decode_seconds;
            log_speedup_sum[ri] += std::log(row.speedup_vs_first[ri]);
        }
        log_energy_sum += std::log(row.reports[0].decode_joules /
                                   row.reports[kLadderRungs - 1].decode_joules);

        row.apsd_rejected_ratio = rejection_stats(ap).rejected_ratio;
        row.parallel_rejected_ratio = rejection_stats(par).rejected_ratio;
        reduction_sum += (row.parallel_rejected_ratio - row.apsd_rejected_ratio) * 100.0;

        report.equivalence_ok = report.equivalence_ok && row.equivalence_ok;
        report.rows.push_back(std::move(row));
    }

    double n = static_cast<double>(seeds.size());
    for (int ri = 0; ri < kLadderRungs; ++ri) {
        report.geo_speedup_vs_first[ri] = std::exp(log_speedup_sum[ri] / n);
    }
    report.geo_speedup_vs_prev[0] = 1.0;
    for (int ri = 1; ri < kLadderRungs; ++ri) {
        report.geo_speedup_vs_prev[ri] =
            report.geo_speedup_vs_first[ri] / report.geo_speedup_vs_first[ri - 1];
    }
    report.geo_energy_ratio_last_vs_first = std::exp(log_energy_sum / n);
    report.mean_rejection_reduction_pp = reduction_sum / n;
    return report;
}

}  // namespace sdsim
