#include "sdsim/specdec.hpp"

#include <algorithm>

#include "json.hpp"

namespace sdsim {

const char* policy_name(SdPolicy p) {
    switch (p) {
        case SdPolicy::ad: return "ad";
        case SdPolicy::vanilla_sd: return "sd";
        case SdPolicy::parallel_sd: return "parallel_sd";
        case SdPolicy::apsd: return "apsd";
    }
    return "?";
}

void SdPolicyConfig::validate() const {
    if (gamma_short < 1 || gamma_short > gamma_long || gamma_long > 32) {
        throw ConfigError("specdec: need 1 <= gamma_short <= gamma_long <= 32, got " +
                          std::to_string(gamma_short) + "/" + std::to_string(gamma_long));
    }
    if (max_new_tokens < 0) throw ConfigError("specdec: max_new_tokens must be >= 0");
}

namespace {

// Re-point a session at `target`, reusing the cached common prefix.
void sync_session(LmSession& s, const std::vector<int>& target) {
    size_t common = 0;
    while (common < s.size() && common < target.size() && s.tokens()[common] == target[common]) {
        ++common;
    }
    s.truncate(common);
    s.extend(std::span<const int>(target.data() + common, target.size() - common));
}

std::vector<int> draft_tokens(LmSession& dlm, const std::vector<int>& context, int count,
                              int max_context) {
    int room = max_context - static_cast<int>(context.size());
    count = std::min(count, room);
    if (count <= 0) return {};
    sync_session(dlm, context);
    std::vector<int> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        int next = dlm.greedy_at(dlm.size() - 1);
        out.push_back(next);
        if (static_cast<int>(dlm.size()) >= max_context) break;
        int one[] = {next};
        dlm.extend(one);
    }
    return out;
}

struct VerifyResult {
    int accepted = 0;
    int next_token = 0;  // correction at the first mismatch, or the bonus
};

// One target-model pass over context+drafts; greedy exact-match acceptance.
VerifyResult verify_drafts(LmSession& tlm, const std::vector<int>& context,
                           const std::vector<int>& drafts) {
    std::vector<int> extended = context;
    extended.insert(extended.end(), drafts.begin(), drafts.end());
    sync_session(tlm, extended);
    VerifyResult res;
    size_t base = context.size() - 1;
    for (size_t j = 0; j < drafts.size(); ++j) {
        int choice = tlm.greedy_at(base + j);
        if (drafts[j] != choice) {
            res.accepted = static_cast<int>(j);
            res.next_token = choice;
            return res;
        }
    }
    res.accepted = static_cast<int>(drafts.size());
    res.next_token = tlm.greedy_at(base + drafts.size());
    return res;
}

class DecodeEngine {
public:
    DecodeEngine(const ToyLm& tlm, const ToyLm& dlm, const std::vector<int>& prompt, int steps,
                 SdPolicy policy)
        : tlm_session_(tlm), dlm_session_(dlm), max_context_(tlm.max_context()), steps_(steps) {
        trace_.policy = policy;
        trace_.prompt_len = static_cast<int>(prompt.size());
        trace_.tokens = prompt;
        tlm_session_.reset(prompt);
    }

    bool done() const {
        return produced() >= steps_ || static_cast<int>(trace_.tokens.size()) >= max_context_;
    }
    int produced() const { return static_cast<int>(trace_.tokens.size()) - trace_.prompt_len; }
    const std::vector<int>& sequence() const { return trace_.tokens; }
    int max_context() const { return max_context_; }

    std::vector<int> draft(const std::vector<int>& context, int count) {
        return draft_tokens(dlm_session_, context, count, max_context_);
    }

    // Runs verification, appends the accepted prefix plus the next token
    // (capped at the step budget), and records the round.
    VerifyResult verify_and_commit(const std::vector<int>& drafts, RoundRecord rec) {
        VerifyResult res = verify_drafts(tlm_session_, trace_.tokens, drafts);
        rec.round = static_cast<int>(trace_.rounds.size());
        rec.batch_drafts = static_cast<int>(drafts.size());
        rec.accepted = res.accepted;
        rec.tlm_positions = static_cast<int>(drafts.size()) + 1;
        rec.mode_switch =
            !trace_.rounds.empty() && trace_.rounds.back().mode != rec.mode;

        int budget = std::min(steps_ - produced(),
                              max_context_ - static_cast<int>(trace_.tokens.size()));
        int appended = std::min(res.accepted + 1, budget);
        rec.appended = appended;
        for (int i = 0; i < appended; ++i) {
            trace_.tokens.push_back(i < res.accepted ? drafts[i] : res.next_token);
        }
        trace_.rounds.push_back(rec);
        return res;
    }

    void mark_last_round_discard(int tokens) {
        RoundRecord& rec = trace_.rounds.back();
        rec.discarded_concurrent = true;
        rec.discarded_tokens = tokens;
    }

    DecodeTrace take_trace() { return std::move(trace_); }

private:
    LmSession tlm_session_;
    LmSession dlm_session_;
    int max_context_;
    int steps_;
    DecodeTrace trace_;
};

}  // namespace

DecodeTrace decode_ad(const ToyLm& tlm, const std::vector<int>& prompt, int steps) {
    DecodeEngine eng(tlm, tlm, prompt, steps, SdPolicy::ad);
    while (!eng.done()) {
        RoundRecord rec;
        rec.mode = RoundMode::non_parallel;
        eng.verify_and_commit({}, rec);
    }
    return eng.take_trace();
}

DecodeTrace decode_sd(const ToyLm& tlm, const ToyLm& dlm, const std::vector<int>& prompt,
                      int steps, int gamma) {
    if (gamma < 1) throw ConfigError("decode_sd: gamma must be >= 1");
    DecodeEngine eng(tlm, dlm, prompt, steps, SdPolicy::vanilla_sd);
    while (!eng.done()) {
        std::vector<int> drafts = eng.draft(eng.sequence(), gamma);
        RoundRecord rec;
        rec.mode = RoundMode::non_parallel;
        rec.serial_draft_tokens = static_cast<int>(drafts.size());
        eng.verify_and_commit(drafts, rec);
    }
    return eng.take_trace();
}

DecodeTrace decode_parallel_sd(const ToyLm& tlm, const ToyLm& dlm, const std::vector<int>& prompt,
                               int steps, int gamma) {
    if (gamma < 1) throw ConfigError("decode_parallel_sd: gamma must be >= 1");
    DecodeEngine eng(tlm, dlm, prompt, steps, SdPolicy::parallel_sd);
    std::vector<int> carried;
    bool carried_valid = false;
    while (!eng.done()) {
        std::vector<int> drafts;
        int serial = 0;
        if (carried_valid) {
            drafts = carried;
        } else {
            drafts = eng.draft(eng.sequence(), gamma);
            serial = static_cast<int>(drafts.size());
        }
        // Speculative next batch, drafted while the verification runs.
        std::vector<int> context = eng.sequence();
        context.insert(context.end(), drafts.begin(), drafts.end());
        std::vector<int> spec = eng.draft(context, gamma);

        RoundRecord rec;
        rec.mode = RoundMode::parallel;
        rec.serial_draft_tokens = serial;
        rec.concurrent_draft_tokens = static_cast<int>(spec.size());
        VerifyResult res = eng.verify_and_commit(drafts, rec);

        bool keep = res.accepted == static_cast<int>(drafts.size()) && !spec.empty() &&
                    spec[0] == res.next_token;
        if (keep) {
            carried.assign(spec.begin() + 1, spec.end());
            carried_valid = true;
        } else {
            carried_valid = false;
            eng.mark_last_round_discard(static_cast<int>(spec.size()));
        }
    }
    return eng.take_trace();
}

DecodeTrace decode_apsd(const ToyLm& tlm, const ToyLm& dlm, const std::vector<int>& prompt,
                        int steps, int gamma_short, int gamma_long) {
    SdPolicyConfig cfg;
    cfg.gamma_short = gamma_short;
    cfg.gamma_long = gamma_long;
    cfg.validate();
    DecodeEngine eng(tlm, dlm, prompt, steps, SdPolicy::apsd);
    RoundMode mode = RoundMode::non_parallel;
    std::vector<int> carried;
    bool carried_valid = false;
    while (!eng.done()) {
        if (mode == RoundMode::non_parallel) {
            std::vector<int> drafts = eng.draft(eng.sequence(), gamma_short);
            RoundRecord rec;
            rec.mode = RoundMode::non_parallel;
            rec.serial_draft_tokens = static_cast<int>(drafts.size());
            VerifyResult res = eng.verify_and_commit(drafts, rec);
            if (!drafts.empty() && res.accepted == static_cast<int>(drafts.size())) {
                mode = RoundMode::parallel;
                carried_valid = false;
            }
        } else {
            std::vector<int> drafts;
            int serial = 0;
            if (carried_valid) {
                drafts = carried;
            } else {
                drafts = eng.draft(eng.sequence(), gamma_long);
                serial = static_cast<int>(drafts.size());
            }
            std::vector<int> context = eng.sequence();
            context.insert(context.end(), drafts.begin(), drafts.end());
            std::vector<int> spec = eng.draft(context, gamma_long);

            RoundRecord rec;
            rec.mode = RoundMode::parallel;
            rec.serial_draft_tokens = serial;
            rec.concurrent_draft_tokens = static_cast<int>(spec.size());
            VerifyResult res = eng.verify_and_commit(drafts, rec);

            bool keep = res.accepted == static_cast<int>(drafts.size()) && !spec.empty() &&
                        spec[0] == res.next_token;
            if (keep) {
                carried.assign(spec.begin() + 1, spec.end());
                carried_valid = true;
            } else {
                carried_valid = false;
                mode = RoundMode::non_parallel;
                eng.mark_last_round_discard(static_cast<int>(spec.size()));
            }
        }
    }
    return eng.take_trace();
}

DecodeTrace decode_with_policy(const SdPolicyConfig& config, const ToyLm& tlm, const ToyLm& dlm,
                               const std::vector<int>& prompt) {
    config.validate();
    switch (config.policy) {
        case SdPolicy::ad:
            return decode_ad(tlm, prompt, config.max_new_tokens);
        case SdPolicy::vanilla_sd:
            return decode_sd(tlm, dlm, prompt, config.max_new_tokens, config.gamma_short);
        case SdPolicy::parallel_sd:
            return decode_parallel_sd(tlm, dlm, prompt, config.max_new_tokens, config.gamma_long);
        case SdPolicy::apsd:
            return decode_apsd(tlm, dlm, prompt, config.max_new_tokens, config.gamma_short,
                               config.gamma_long);
    }
    throw ConfigError("decode_with_policy: unknown policy");
}

std::string DecodeTrace::to_jsonl() const {
    std::string out;
    auto mode_str = [](RoundMode m) {
        return m == RoundMode::parallel ? "parallel" : "non_parallel";
    };
    for (const auto& r : rounds) {
        if (r.mode_switch) {
            nlohmann::json ev;
            ev["type"] = "mode";
            ev["round"] = r.round;
            ev["to"] = mode_str(r.mode);
            out += ev.dump() + "\n";
        }
        if (r.serial_draft_tokens > 0 || r.concurrent_draft_tokens > 0) {
            nlohmann::json ev;
            ev["type"] = "draft";
            ev["round"] = r.round;
            ev["mode"] = mode_str(r.mode);
            ev["serial"] = r.serial_draft_tokens;
            ev["concurrent"] = r.concurrent_draft_tokens;
            out += ev.dump() + "\n";
        }
        nlohmann::json ev;
        ev["type"] = "verify";
        ev["round"] = r.round;
        ev["mode"] = mode_str(r.mode);
        ev["batch"] = r.batch_drafts;
        ev["accepted"] = r.accepted;
        ev["appended"] = r.appended;
        ev["discarded"] = r.discarded_tokens;
        out += ev.dump() + "\n";
    }
    nlohmann::json fin;
    fin["type"] = "final";
    fin["policy"] = policy_name(policy);
    fin["prompt_len"] = prompt_len;
    fin["tokens"] = tokens;
    out += fin.dump() + "\n";
    return out;
}

RejectionStats rejection_stats(const DecodeTrace& trace, double per_draft_token_cost) {
    RejectionStats st;
    int64_t bonus_matches = 0;
    for (const auto& r : trace.rounds) {
        st.drafted_total += r.serial_draft_tokens + r.concurrent_draft_tokens;
        st.accepted += r.accepted;
        st.rejected += r.batch_drafts - r.accepted;
        st.rejected += r.discarded_tokens;
        if (r.mode == RoundMode::parallel && r.concurrent_draft_tokens > 0 &&
            !r.discarded_concurrent) {
            ++bonus_matches;  // the first speculative token matched the bonus
        }
    }
    st.accepted += bonus_matches;
    st.unresolved = st.drafted_total - st.accepted - st.rejected;
    int64_t resolved = st.accepted + st.rejected;
    st.rejected_ratio = resolved > 0 ? static_cast<double>(st.rejected) / resolved : 0.0;
    st.rejected_time_fraction =
        resolved > 0 ? (st.rejected * per_draft_token_cost) / (resolved * per_draft_token_cost)
                     : 0.0;
    return st;
}

}  // namespace sdsim
