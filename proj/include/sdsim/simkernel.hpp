#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sdsim/memmodel.hpp"
#include "sdsim/specdec.hpp"
#include "sdsim/wdos.hpp"

namespace sdsim {

enum class TlmPrecision { bf16, w4a8 };
enum class DlmSource { dram_raw, reram_bvq };

const char* precision_name(TlmPrecision p);
const char* dlm_source_name(DlmSource s);

// Byte and op counts per decode step. The defaults mimic a 7B-parameter
// target model with a 0.25B draft model; only the ratios matter, absolute
// token rates are reported but never asserted.
struct WorkloadConfig {
    TlmPrecision precision = TlmPrecision::w4a8;
    DlmSource dlm_source = DlmSource::reram_bvq;

    double tlm_bytes_bf16 = 14e9;    // 7e9 params * 2 bytes
    double tlm_bytes_w4a8 = 3.5e9;   // 4-bit weights
    double dlm_bytes_bf16 = 0.5e9;   // 0.25e9 params * 2 bytes
    double dlm_bytes_w4 = 0.125e9;
    double dlm_bytes_bvq = 16e6;     // packed indices + codebooks

    double tlm_step_ops = 14e9;      // 2 ops per parameter
    double dlm_step_ops = 0.5e9;
    double compute_throughput = 2.33e12;  // ops/s peak

    int prefill_tokens = 64;

    double tlm_bytes() const {
        return precision == TlmPrecision::bf16 ? tlm_bytes_bf16 : tlm_bytes_w4a8;
    }
    double dlm_bytes() const {
        if (dlm_source == DlmSource::reram_bvq) return dlm_bytes_bvq;
        return precision == TlmPrecision::bf16 ? dlm_bytes_bf16 : dlm_bytes_w4;
    }
    void validate() const;
};

enum class SimRole { tlm, dlm };

// Roofline step latency: max(compute time, weight-movement time). The target
// model streams from DRAM; the draft model streams from DRAM or from the
// stacked memory at the interleaved aggregate bandwidth.
double step_latency(SimRole role, const WorkloadConfig& workload, const StackConfig& stack);

struct SimReport {
    int decode_tokens = 0;
    double decode_seconds = 0.0;
    double tokens_per_s = 0.0;
    double decode_joules = 0.0;
    double mj_per_token = 0.0;
    double prefill_seconds = 0.0;
    double prefill_joules = 0.0;
    // Breakdown of decode time.
    double serial_draft_seconds = 0.0;
    double verify_seconds = 0.0;
    double hidden_draft_seconds = 0.0;   // draft work overlapped with verification
    double exposed_draft_seconds = 0.0;  // draft work that outlasted its verification
    int64_t rounds = 0;
    bool used_wdos = false;
};

// Converts a decode trace into time and energy. Non-parallel rounds pay
// drafts serially before the verification; parallel rounds pay
// max(draft work, verification). With wdos_detail the decode time instead
// comes from the makespan of a four-queue program built from the trace.
SimReport simulate_run(const DecodeTrace& trace, const WorkloadConfig& workload,
                       const StackConfig& stack, bool wdos_detail = false);

// The four-queue program used by the detail mode, exposed for inspection.
Program build_wdos_program(const DecodeTrace& trace, const WorkloadConfig& workload,
                           const StackConfig& stack, double tick_seconds);

inline constexpr double kWdosTickSeconds = 1e-7;

// Policy ladder: the same seeded model pairs priced under each deployment
// stage, plus a fixed-long-draft parallel baseline for rejection accounting.
struct LadderConfig {
    WorkloadConfig workload;
    StackConfig stack;
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

    void validate() const;
};

inline constexpr int kLadderRungs = 4;

struct LadderRungSpec {
    const char* name;
    TlmPrecision precision;
    DlmSource dlm_source;
    SdPolicy policy;
};

const std::array<LadderRungSpec, kLadderRungs>& ladder_rungs();

struct LadderSeedRow {
    uint64_t seed = 0;
    std::array<SimReport, kLadderRungs> reports;
    std::array<double, kLadderRungs> speedup_vs_first{};
    double apsd_rejected_ratio = 0.0;
    double parallel_rejected_ratio = 0.0;  // fixed gamma_long, always parallel
    bool equivalence_ok = true;
};

struct LadderReport {
    std::vector<LadderSeedRow> rows;
    std::array<double, kLadderRungs> geo_speedup_vs_first{};
    std::array<double, kLadderRungs> geo_speedup_vs_prev{};
    double geo_energy_ratio_last_vs_first = 0.0;
    double mean_rejection_reduction_pp = 0.0;  // parallel minus apsd, percentage points
    bool equivalence_ok = true;
};

LadderReport compare_policies(const LadderConfig& config, const std::vector<uint64_t>& seeds);

}  // namespace sdsim
