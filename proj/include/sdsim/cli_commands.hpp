#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace sdsim {

// Shared CLI options. Overrides beat the values in the config file.
struct CliOptions {
    std::string config_path;
    std::string out_dir;                // --out
    std::optional<uint64_t> seed;       // --seed
    std::string format;                 // --format csv|json
    std::string inject_fault;           // verify only, test hook
};

// Exit codes: 0 success, 1 I/O, 2 config/feasibility, 3 correctness.
inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitCorrectness = 3;

int cmd_rotate_eval(const CliOptions& opts, std::ostream& log);
int cmd_bvq_train(const CliOptions& opts, std::ostream& log);
int cmd_simulate(const CliOptions& opts, std::ostream& log);
int cmd_verify(const CliOptions& opts, std::ostream& log);
int cmd_sweep(const CliOptions& opts, std::ostream& log);

// Maps thrown errors onto the exit-code contract; used by main and tests.
int run_command_guarded(int (*cmd)(const CliOptions&, std::ostream&), const CliOptions& opts,
                        std::ostream& log);

}  // namespace sdsim
