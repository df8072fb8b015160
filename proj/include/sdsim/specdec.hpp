#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdsim/toylm.hpp"

namespace sdsim {

enum class SdPolicy { ad, vanilla_sd, parallel_sd, apsd };

const char* policy_name(SdPolicy p);

struct SdPolicyConfig {
    int gamma_short = 2;
    int gamma_long = 6;
    SdPolicy policy = SdPolicy::apsd;
    int max_new_tokens = 48;

    void validate() const;
};

enum class RoundMode { non_parallel, parallel };

// One draft/verify round. Draft-token counts are split by where the DLM work
// sits: serial tokens block the round, concurrent tokens overlap the TLM
// verification (the timing model charges them inside max()).
struct RoundRecord {
    int round = 0;
    RoundMode mode = RoundMode::non_parallel;
    int serial_draft_tokens = 0;
    int concurrent_draft_tokens = 0;
    int batch_drafts = 0;   // drafts checked by this round's verification
    int accepted = 0;       // leading drafts that matched the target model
    int appended = 0;       // tokens added to the output (accepted + 1, capped)
    bool discarded_concurrent = false;
    int discarded_tokens = 0;
    bool mode_switch = false;  // mode differs from the previous round
    int tlm_positions = 1;     // positions evaluated by the verification pass
};

struct DecodeTrace {
    SdPolicy policy = SdPolicy::ad;
    int prompt_len = 0;
    std::vector<int> tokens;  // prompt + generated
    std::vector<RoundRecord> rounds;

    // One JSON object per line: draft, verify, and mode events.
    std::string to_jsonl() const;
};

DecodeTrace decode_ad(const ToyLm& tlm, const std::vector<int>& prompt, int steps);

DecodeTrace decode_sd(const ToyLm& tlm, const ToyLm& dlm, const std::vector<int>& prompt,
                      int steps, int gamma);

// Always-parallel variant: while a batch is being verified the draft model
// speculatively drafts the next batch on top of it. A verification failure
// (or a bonus-token mismatch) throws the speculative batch away.
DecodeTrace decode_parallel_sd(const ToyLm& tlm, const ToyLm& dlm, const std::vector<int>& prompt,
                               int steps, int gamma);

// Adaptive policy: serial short-draft rounds until a round fully accepts,
// then parallel long-draft rounds for as long as every verification accepts
// everything and the bonus token matches the first speculative draft.
DecodeTrace decode_apsd(const ToyLm& tlm, const ToyLm& dlm, const std::vector<int>& prompt,
                        int steps, int gamma_short, int gamma_long);

DecodeTrace decode_with_policy(const SdPolicyConfig& config, const ToyLm& tlm, const ToyLm& dlm,
                               const std::vector<int>& prompt);

// Rejection accounting. A drafted token is resolved-accepted when its
// verification (or the bonus-match check) confirmed it, resolved-rejected
// when it failed verification or was discarded with a speculative batch.
// Tokens still unverified when decoding stops count as unresolved.
struct RejectionStats {
    int64_t drafted_total = 0;     // every token the draft model produced
    int64_t accepted = 0;
    int64_t rejected = 0;
    int64_t unresolved = 0;
    double rejected_ratio = 0.0;   // rejected / (accepted + rejected)
    double rejected_time_fraction = 0.0;  // same weighting by a per-token cost
};

RejectionStats rejection_stats(const DecodeTrace& trace, double per_draft_token_cost = 1.0);

}  // namespace sdsim
