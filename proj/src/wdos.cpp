#include "sdsim/wdos.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

namespace sdsim {

const char* queue_name(Queue q) {
    switch (q) {
        case Queue::transceiver: return "transceiver";
        case Queue::compute: return "compute";
        case Queue::reram_load: return "reram_load";
        case Queue::emac: return "emac";
    }
    return "?";
}

std::optional<Queue> parse_queue(const std::string& name) {
    for (int i = 0; i < kNumQueues; ++i) {
        if (name == queue_name(static_cast<Queue>(i))) return static_cast<Queue>(i);
    }
    return std::nullopt;
}

int Program::add(Queue q, int64_t duration, std::vector<ParentThreshold> parents,
                 std::string tag) {
    if (duration < 1) {
        throw ProgramError("instruction duration must be >= 1, got " + std::to_string(duration));
    }
    Instruction ins;
    ins.id = next_id_++;
    ins.queue = q;
    ins.duration = duration;
    ins.parents = std::move(parents);
    ins.tag = std::move(tag);
    queues_[static_cast<int>(q)].push_back(std::move(ins));
    return next_id_ - 1;
}

int64_t Program::total_instructions() const {
    int64_t n = 0;
    for (const auto& q : queues_) n += static_cast<int64_t>(q.size());
    return n;
}

int64_t Program::total_duration() const {
    int64_t d = 0;
    for (const auto& q : queues_) {
        for (const auto& ins : q) d += ins.duration;
    }
    return d;
}

Program Program::parse(std::istream& in) {
    Program prog;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string queue_word;
        if (!(ls >> queue_word)) continue;  // blank line
        auto q = parse_queue(queue_word);
        if (!q) {
            throw ProgramError("line " + std::to_string(lineno) + ": unknown queue '" +
                               queue_word + "'");
        }
        int64_t duration = 0;
        if (!(ls >> duration)) {
            throw ProgramError("line " + std::to_string(lineno) + ": missing duration");
        }
        std::vector<ParentThreshold> parents;
        std::string tag;
        std::string word;
        while (ls >> word) {
            if (word.rfind("tag=", 0) == 0) {
                tag = word.substr(4);
                continue;
            }
            auto ge = word.find(">=");
            if (ge == std::string::npos) {
                throw ProgramError("line " + std::to_string(lineno) + ": malformed token '" +
                                   word + "', expected <queue>>=<count> or tag=<word>");
            }
            auto pq = parse_queue(word.substr(0, ge));
            if (!pq) {
                throw ProgramError("line " + std::to_string(lineno) + ": unknown parent queue '" +
                                   word.substr(0, ge) + "'");
            }
            int64_t count = 0;
            try {
                size_t used = 0;
                std::string num = word.substr(ge + 2);
                count = std::stoll(num, &used);
                if (used != num.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ProgramError("line " + std::to_string(lineno) + ": malformed threshold '" +
                                   word + "'");
            }
            parents.push_back({*pq, count});
        }
        try {
            prog.add(*q, duration, std::move(parents), std::move(tag));
        } catch (const ProgramError& e) {
            throw ProgramError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return prog;
}

Program Program::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open program file: " + path);
    return parse(in);
}

std::string Schedule::to_csv() const {
    std::string out = "id,queue,issue,complete\n";
    for (const auto& e : entries) {
        out += std::to_string(e.id) + "," + queue_name(e.queue) + "," + std::to_string(e.issue) +
               "," + std::to_string(e.complete) + "\n";
    }
    return out;
}

const ScheduleEntry* Schedule::find(int id) const {
    for (const auto& e : entries) {
        if (e.id == id) return &e;
    }
    return nullptr;
}

Scheduler::Scheduler(Program program) : program_(std::move(program)) {
    // Static validation: a threshold can never be met if it asks for more
    // completions than the parent queue holds.
    for (int qi = 0; qi < kNumQueues; ++qi) {
        for (const auto& ins : program_.queue(static_cast<Queue>(qi))) {
            for (const auto& p : ins.parents) {
                if (p.count < 1) {
                    throw ProgramError("instruction " + std::to_string(ins.id) +
                                       ": threshold count must be >= 1");
                }
                int64_t available =
                    static_cast<int64_t>(program_.queue(p.queue).size());
                if (p.count > available) {
                    throw ProgramError(
                        "instruction " + std::to_string(ins.id) + " waits for " +
                        std::to_string(p.count) + " completions of " + queue_name(p.queue) +
                        ", which only holds " + std::to_string(available) + " instructions");
                }
            }
        }
    }
}

namespace {

struct QueueState {
    size_t next = 0;             // program-order cursor
    bool busy = false;
    int64_t complete_at = 0;
    const Instruction* running = nullptr;
};

bool thresholds_met(const Instruction& ins, const CounterMatrix& counters, Queue own) {
    for (const auto& p : ins.parents) {
        if (counters.counts[static_cast<int>(p.queue)][static_cast<int>(own)] < p.count) {
            return false;
        }
    }
    return true;
}

std::string describe_block(const Program& prog, const std::array<QueueState, kNumQueues>& qs,
                           const CounterMatrix& counters) {
    std::string msg = "deadlock:";
    for (int qi = 0; qi < kNumQueues; ++qi) {
        const auto& list = prog.queue(static_cast<Queue>(qi));
        if (qs[qi].next >= list.size()) continue;
        const Instruction& head = list[qs[qi].next];
        msg += " [" + std::string(queue_name(head.queue)) + " head id=" +
               std::to_string(head.id) + " needs";
        for (const auto& p : head.parents) {
            int64_t have = counters.counts[static_cast<int>(p.queue)][qi];
            msg += " " + std::string(queue_name(p.queue)) + ">=" + std::to_string(p.count) +
                   "(have " + std::to_string(have) + ")";
        }
        msg += "]";
    }
    return msg;
}

}  // namespace

Schedule Scheduler::run() const {
    std::array<QueueState, kNumQueues> qs;
    CounterMatrix counters;
    Schedule sched;
    int64_t remaining = program_.total_instructions();
    sched.entries.resize(static_cast<size_t>(remaining));
    int64_t now = 0;

    auto record = [&](const Instruction& ins, int64_t issue, int64_t complete) {
        ScheduleEntry e;
        e.id = ins.id;
        e.queue = ins.queue;
        e.issue = issue;
        e.complete = complete;
        e.tag = ins.tag;
        sched.entries[static_cast<size_t>(ins.id)] = e;
    };

    while (remaining > 0) {
        // Issue phase at `now`, fixed queue order. Counters do not change
        // here, so one pass is enough.
        for (int qi = 0; qi < kNumQueues; ++qi) {
            QueueState& st = qs[qi];
            const auto& list = program_.queue(static_cast<Queue>(qi));
            if (st.busy || st.next >= list.size()) continue;
            const Instruction& head = list[st.next];
            if (!thresholds_met(head, counters, static_cast<Queue>(qi))) continue;
            st.busy = true;
            st.running = &head;
            st.complete_at = now + head.duration;
            st.next++;
        }
        // Advance to the earliest completion.
        int64_t next_t = std::numeric_limits<int64_t>::max();
        for (const auto& st : qs) {
            if (st.busy) next_t = std::min(next_t, st.complete_at);
        }
        if (next_t == std::numeric_limits<int64_t>::max()) {
            throw DeadlockError(describe_block(program_, qs, counters));
        }
        now = next_t;
        for (int qi = 0; qi < kNumQueues; ++qi) {
            QueueState& st = qs[qi];
            if (!st.busy || st.complete_at != now) continue;
            record(*st.running, st.complete_at - st.running->duration, st.complete_at);
            for (int q2 = 0; q2 < kNumQueues; ++q2) counters.counts[qi][q2]++;
            st.busy = false;
            st.running = nullptr;
            --remaining;
        }
        sched.makespan = std::max(sched.makespan, now);
    }
    sched.counters = counters;
    return sched;
}

Schedule Scheduler::run_in_order() const {
    std::array<QueueState, kNumQueues> qs;
    CounterMatrix counters;
    Schedule sched;
    int64_t remaining = program_.total_instructions();
    sched.entries.resize(static_cast<size_t>(remaining));
    int64_t now = 0;
    int rr = 0;

    while (remaining > 0) {
        int pick = -1;
        for (int step = 0; step < kNumQueues; ++step) {
            int qi = (rr + step) % kNumQueues;
            const auto& list = program_.queue(static_cast<Queue>(qi));
            if (qs[qi].next >= list.size()) continue;
            if (thresholds_met(list[qs[qi].next], counters, static_cast<Queue>(qi))) {
                pick = qi;
                break;
            }
        }
        if (pick < 0) {
            throw DeadlockError(describe_block(program_, qs, counters));
        }
        const auto& list = program_.queue(static_cast<Queue>(pick));
        const Instruction& ins = list[qs[pick].next];
        qs[pick].next++;
        ScheduleEntry e;
        e.id = ins.id;
        e.queue = ins.queue;
        e.issue = now;
        e.complete = now + ins.duration;
        e.tag = ins.tag;
        sched.entries[static_cast<size_t>(ins.id)] = e;
        now += ins.duration;
        for (int q2 = 0; q2 < kNumQueues; ++q2) {
            counters.counts[pick][q2]++;
        }
        --remaining;
        rr = (pick + 1) % kNumQueues;
        sched.makespan = now;
    }
    sched.counters = counters;
    return sched;
}

}  // namespace sdsim
