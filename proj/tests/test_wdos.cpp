#include "doctest.h"

#include <map>
#include <sstream>

#include "sdsim/rng.hpp"
#include "sdsim/wdos.hpp"

using namespace sdsim;

namespace {

// Feasible-by-construction random program: instructions are generated along a
// global sequence, and every threshold references completions that earlier
// sequence positions already provide.
Program random_acyclic_program(Rng& rng, int n) {
    Program prog;
    std::array<int, kNumQueues> emitted{};
    for (int i = 0; i < n; ++i) {
        Queue q = static_cast<Queue>(rng.uniform_int(0, kNumQueues - 1));
        std::vector<ParentThreshold> parents;
        int num_parents = rng.uniform_int(0, 2);
        for (int p = 0; p < num_parents; ++p) {
            Queue pq = static_cast<Queue>(rng.uniform_int(0, kNumQueues - 1));
            if (emitted[static_cast<int>(pq)] == 0) continue;
            parents.push_back({pq, rng.uniform_int(1, emitted[static_cast<int>(pq)])});
        }
        prog.add(q, rng.uniform_int(1, 20), std::move(parents));
        emitted[static_cast<int>(q)]++;
    }
    return prog;
}

Program random_cyclic_program(Rng& rng) {
    // A mutual wait between two queues, plus some independent filler.
    Program prog;
    Queue a = static_cast<Queue>(rng.uniform_int(0, 1));
    Queue b = static_cast<Queue>(rng.uniform_int(2, 3));
    prog.add(a, rng.uniform_int(1, 10), {{b, 1}});
    prog.add(b, rng.uniform_int(1, 10), {{a, 1}});
    int filler = rng.uniform_int(0, 3);
    for (int i = 0; i < filler; ++i) {
        Queue q = (rng.uniform_int(0, 1) == 0) ? a : b;
        prog.add(q, rng.uniform_int(1, 10));
    }
    return prog;
}

void check_schedule_valid(const Program& prog, const Schedule& sched) {
    // Per-queue program order and happens-before against parent thresholds.
    for (int qi = 0; qi < kNumQueues; ++qi) {
        const auto& list = prog.queue(static_cast<Queue>(qi));
        for (size_t i = 1; i < list.size(); ++i) {
            const auto* prev = sched.find(list[i - 1].id);
            const auto* cur = sched.find(list[i].id);
            REQUIRE(prev != nullptr);
            REQUIRE(cur != nullptr);
            CHECK(prev->complete <= cur->issue);
        }
        // completion times per parent queue, sorted by program order
        // (completions in a queue are in program order for single-issue).
    }
    for (int qi = 0; qi < kNumQueues; ++qi) {
        for (const auto& ins : prog.queue(static_cast<Queue>(qi))) {
            const auto* entry = sched.find(ins.id);
            REQUIRE(entry != nullptr);
            CHECK(entry->complete == entry->issue + ins.duration);
            for (const auto& p : ins.parents) {
                // The c-th completion of the parent queue must be <= issue.
                std::vector<int64_t> completions;
                for (const auto& pi : prog.queue(p.queue)) {
                    completions.push_back(sched.find(pi.id)->complete);
                }
                std::sort(completions.begin(), completions.end());
                REQUIRE(p.count <= static_cast<int64_t>(completions.size()));
                CHECK(completions[p.count - 1] <= entry->issue);
            }
        }
    }
}

}  // namespace

TEST_CASE("empty program completes in zero cycles") {
    Scheduler s{Program{}};
    Schedule sched = s.run();
    CHECK(sched.makespan == 0);
    CHECK(sched.entries.empty());
    CHECK(s.run_in_order().makespan == 0);
}

TEST_CASE("independent instructions issue at cycle 0") {
    Program prog;
    for (int qi = 0; qi < kNumQueues; ++qi) {
        prog.add(static_cast<Queue>(qi), 10);
    }
    Schedule sched = Scheduler(prog).run();
    for (const auto& e : sched.entries) {
        CHECK(e.issue == 0);
        CHECK(e.complete == 10);
    }
    CHECK(sched.makespan == 10);  // parallel, not 40
    CHECK(Scheduler(prog).run_in_order().makespan == 40);
}

TEST_CASE("dependency chain timing") {
    Program prog;
    int a = prog.add(Queue::compute, 3);
    int b = prog.add(Queue::reram_load, 2, {{Queue::compute, 1}});
    Schedule sched = Scheduler(prog).run();
    const auto* ea = sched.find(a);
    const auto* eb = sched.find(b);
    CHECK(ea->issue == 0);
    CHECK(ea->complete == 3);
    CHECK(eb->issue == 3);
    CHECK(eb->complete == 5);
    CHECK(sched.makespan == 5);

    // Same completion order under the serial baseline.
    Schedule serial = Scheduler(prog).run_in_order();
    CHECK(serial.find(a)->complete < serial.find(b)->complete);
    CHECK(serial.makespan == 5);
}

TEST_CASE("unsatisfiable threshold is a static error") {
    Program prog;
    prog.add(Queue::compute, 1);
    prog.add(Queue::compute, 1);
    prog.add(Queue::compute, 1);
    prog.add(Queue::emac, 1, {{Queue::compute, 5}});
    CHECK_THROWS_AS(Scheduler{prog}, ProgramError);
}

TEST_CASE("mutual wait deadlocks with a useful message") {
    Program prog;
    prog.add(Queue::compute, 1, {{Queue::reram_load, 1}});
    prog.add(Queue::reram_load, 1, {{Queue::compute, 1}});
    Scheduler s{prog};
    CHECK_THROWS_AS(s.run(), DeadlockError);
    try {
        s.run();
    } catch (const DeadlockError& e) {
        std::string msg = e.what();
        CHECK(msg.find("compute") != std::string::npos);
        CHECK(msg.find("reram_load") != std::string::npos);
        CHECK(msg.find("have 0") != std::string::npos);
    }
}

TEST_CASE("counter matrix is synchronous and bounded") {
    Program prog;
    prog.add(Queue::compute, 2);
    prog.add(Queue::compute, 2);
    prog.add(Queue::emac, 1, {{Queue::compute, 2}});
    Schedule sched = Scheduler(prog).run();
    for (int q2 = 0; q2 < kNumQueues; ++q2) {
        CHECK(sched.counters.counts[static_cast<int>(Queue::compute)][q2] == 2);
        CHECK(sched.counters.counts[static_cast<int>(Queue::emac)][q2] == 1);
        CHECK(sched.counters.counts[static_cast<int>(Queue::transceiver)][q2] == 0);
    }
    CHECK(sched.find(2)->issue == 4);  // after both compute completions
}

TEST_CASE("schedules are deterministic") {
    Rng rng(2718);
    Program prog = random_acyclic_program(rng, 40);
    Schedule a = Scheduler(prog).run();
    Schedule b = Scheduler(prog).run();
    CHECK(a.to_csv() == b.to_csv());
}

TEST_CASE("randomized acyclic programs: happens-before, order, speedup") {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        Program prog = random_acyclic_program(rng, rng.uniform_int(1, 30));
        Scheduler s{prog};
        Schedule ooo = s.run();
        Schedule serial = s.run_in_order();
        check_schedule_valid(prog, ooo);
        check_schedule_valid(prog, serial);
        CHECK(serial.makespan == prog.total_duration());
        CHECK(ooo.makespan <= serial.makespan);
    }
}

TEST_CASE("independent work in two queues is strictly faster than serial") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Program prog;
        int n1 = rng.uniform_int(1, 5);
        int n2 = rng.uniform_int(1, 5);
        for (int i = 0; i < n1; ++i) prog.add(Queue::compute, rng.uniform_int(1, 9));
        for (int i = 0; i < n2; ++i) prog.add(Queue::emac, rng.uniform_int(1, 9));
        Scheduler s{prog};
        CHECK(s.run().makespan < s.run_in_order().makespan);
    }
}

TEST_CASE("cyclic programs always deadlock, in both schedulers") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        Program prog = random_cyclic_program(rng);
        Scheduler s{prog};
        CHECK_THROWS_AS(s.run(), DeadlockError);
        CHECK_THROWS_AS(s.run_in_order(), DeadlockError);
    }
}

TEST_CASE("program text parsing") {
    std::istringstream in(
        "# demo program\n"
        "compute 3 tag=verify\n"
        "reram_load 2 compute>=1\n"
        "\n"
        "emac 5 compute>=1 reram_load>=1 tag=stream\n");
    Program prog = Program::parse(in);
    CHECK(prog.total_instructions() == 3);
    Schedule sched = Scheduler(prog).run();
    CHECK(sched.find(0)->tag == "verify");
    CHECK(sched.find(1)->issue == 3);
    CHECK(sched.find(2)->issue == 5);

    std::istringstream bad1("bogus 3\n");
    CHECK_THROWS_AS(Program::parse(bad1), ProgramError);
    std::istringstream bad2("compute 3 reram>=x\n");
    CHECK_THROWS_AS(Program::parse(bad2), ProgramError);
    std::istringstream bad3("compute\n");
    CHECK_THROWS_AS(Program::parse(bad3), ProgramError);
    std::istringstream bad4("compute 0\n");
    CHECK_THROWS_AS(Program::parse(bad4), ProgramError);
}

TEST_CASE("schedule csv shape") {
    Program prog;
    prog.add(Queue::compute, 3);
    Schedule sched = Scheduler(prog).run();
    CHECK(sched.to_csv() == "id,queue,issue,complete\n0,compute,0,3\n");
}
