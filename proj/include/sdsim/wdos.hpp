#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sdsim/errors.hpp"

namespace sdsim {

// The four single-issue engines. Equal-cycle events always process in this
// order, which pins down the schedule completely.
enum class Queue : int { transceiver = 0, compute = 1, reram_load = 2, emac = 3 };
inline constexpr int kNumQueues = 4;

const char* queue_name(Queue q);
std::optional<Queue> parse_queue(const std::string& name);

// Cross-queue dependency: at least `count` completions in `queue` must have
// been signalled before the dependent instruction may issue.
struct ParentThreshold {
    Queue queue;
    int64_t count;
};

struct Instruction {
    int id = 0;
    Queue queue = Queue::compute;
    int64_t duration = 1;  // cycles, >= 1
    std::vector<ParentThreshold> parents;
    std::string tag;
};

struct ProgramError : std::runtime_error {
    explicit ProgramError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DeadlockError : std::runtime_error {
    explicit DeadlockError(const std::string& msg) : std::runtime_error(msg) {}
};

// Per-queue instruction lists in program order.
class Program {
public:
    int add(Queue q, int64_t duration, std::vector<ParentThreshold> parents = {},
            std::string tag = {});

    const std::vector<Instruction>& queue(Queue q) const {
        return queues_[static_cast<int>(q)];
    }
    int64_t total_instructions() const;
    int64_t total_duration() const;
    bool empty() const { return total_instructions() == 0; }

    // Text format, one instruction per line:
    //   <queue> <duration> [<queue>>=<count> ...] [tag=<word>]
    // '#' starts a comment.
    static Program parse(std::istream& in);
    static Program parse_file(const std::string& path);

private:
    std::array<std::vector<Instruction>, kNumQueues> queues_;
    int next_id_ = 0;
};

// counters[p][q]: completions of queue p that queue q has been notified of.
// Notification is synchronous, at the completion cycle.
struct CounterMatrix {
    std::array<std::array<int64_t, kNumQueues>, kNumQueues> counts{};
};

struct ScheduleEntry {
    int id = 0;
    Queue queue = Queue::compute;
    int64_t issue = 0;
    int64_t complete = 0;
    std::string tag;
};

struct Schedule {
    std::vector<ScheduleEntry> entries;  // in id order
    int64_t makespan = 0;
    CounterMatrix counters;

    std::string to_csv() const;
    const ScheduleEntry* find(int id) const;
};

// Validates the program (thresholds must reference completions some queue
// can eventually produce) and runs it.
class Scheduler {
public:
    explicit Scheduler(Program program);

    // Out-of-order: in-order per queue, cross-queue order limited only by
    // parent thresholds. Throws DeadlockError naming the blocked heads.
    Schedule run() const;

    // Serialization baseline: one instruction at a time, scanning queues
    // round-robin for the next issuable head. Makespan is the duration sum.
    Schedule run_in_order() const;

private:
    Program program_;
};

}  // namespace sdsim
