#include "sdsim/memmodel.hpp"

#include <set>

namespace sdsim {

void StackConfig::validate() const {
    if (dies_per_chip < 1 || chips < 1) throw ConfigError("memmodel: dies and chips must be >= 1");
    if (capacity_per_die_bytes <= 0) throw ConfigError("memmodel: capacity must be positive");
    if (bump_bits_per_cycle <= 0 || bank_width_bits <= 0 || banks_per_die <= 0) {
        throw ConfigError("memmodel: bus and bank geometry must be positive");
    }
    if (reram_clock_hz <= 0 || dram_bandwidth_bytes_per_s <= 0) {
        throw ConfigError("memmodel: clock and bandwidth must be positive");
    }
    if (energy.reram_pj_per_byte < 0 || energy.dram_pj_per_byte < 0 || energy.pj_per_mac < 0) {
        throw ConfigError("memmodel: energy constants must be non-negative");
    }
}

int64_t reram_read_cycles(int64_t entry_bits, const StackConfig& config, CbMapping mode) {
    config.validate();
    if (entry_bits <= 0) {
        throw ValueError("reram_read_cycles: entry_bits must be positive, got " +
                         std::to_string(entry_bits));
    }
    if (entry_bits > config.capacity_per_die_bytes * 8 * config.dies_per_chip) {
        throw ValueError("reram_read_cycles: entry of " + std::to_string(entry_bits) +
                         " bits exceeds stack capacity");
    }
    int64_t row_bits = config.bank_width_bits;
    if (mode == CbMapping::vertical) {
        int64_t stripe = row_bits * config.dies_per_chip;
        return (entry_bits + stripe - 1) / stripe;
    }
    return (entry_bits + row_bits - 1) / row_bits;
}

std::vector<SlicePlacement> entry_placement(const CbLayout& layout, const StackConfig& config,
                                            int entry_id) {
    config.validate();
    if (entry_id < 0 || entry_id >= layout.num_entries) {
        throw ValueError("entry_placement: entry id " + std::to_string(entry_id) +
                         " outside layout with " + std::to_string(layout.num_entries) +
                         " entries");
    }
    int chip = layout.cilm ? entry_id % config.chips : 0;
    int64_t slices = (layout.entry_bits + config.bank_width_bits - 1) / config.bank_width_bits;
    int64_t rows_per_bank_entry =
        reram_read_cycles(layout.entry_bits, config, layout.mode);
    std::vector<SlicePlacement> out;
    out.reserve(static_cast<size_t>(slices));
    if (layout.mode == CbMapping::vertical) {
        // Slice s sits on die (s % dies) at the same bank, row advancing once
        // every full stripe; all dies read in the same cycle.
        int bank = entry_id % config.banks_per_die;
        int64_t base_row = static_cast<int64_t>(entry_id / config.banks_per_die) *
                           rows_per_bank_entry;
        for (int64_t s = 0; s < slices; ++s) {
            out.push_back({chip, static_cast<int>(s % config.dies_per_chip), bank,
                           base_row + s / config.dies_per_chip});
        }
    } else {
        // All slices on one die, consecutive rows of one bank.
        int die = entry_id % config.dies_per_chip;
        int bank = (entry_id / config.dies_per_chip) % config.banks_per_die;
        int64_t base_row = static_cast<int64_t>(entry_id / (config.dies_per_chip *
                                                            config.banks_per_die)) *
                           slices;
        for (int64_t s = 0; s < slices; ++s) {
            out.push_back({chip, die, bank, base_row + s});
        }
    }
    return out;
}

FusedFetchResult fused_fetch_cycles(const FetchTrace& trace, const CbLayout& layout,
                                    const StackConfig& config) {
    int64_t per_entry = reram_read_cycles(layout.entry_bits, config, layout.mode);
    FusedFetchResult res;
    std::set<int> seen;
    for (const auto& [tile, entry] : trace.accesses) {
        if (entry < 0 || entry >= layout.num_entries) {
            throw ValueError("fused_fetch_cycles: entry id " + std::to_string(entry) +
                             " outside layout with " + std::to_string(layout.num_entries) +
                             " entries");
        }
        res.naive_cycles += per_entry;
        if (seen.insert(entry).second) res.fused_cycles += per_entry;
    }
    return res;
}

double cilm_bandwidth(const CbLayout& layout, const StackConfig& config) {
    config.validate();
    double per_chip = config.reram_peak_bandwidth();
    if (layout.cilm) {
        return per_chip * config.chips;
    }
    return per_chip;
}

TimeEnergy ema_time_and_energy(int64_t bytes, const StackConfig& config) {
    config.validate();
    if (bytes < 0) throw ValueError("ema_time_and_energy: bytes must be >= 0");
    TimeEnergy te;
    te.seconds = static_cast<double>(bytes) / config.dram_bandwidth_bytes_per_s;
    te.joules = static_cast<double>(bytes) * config.energy.dram_pj_per_byte * 1e-12;
    return te;
}

}  // namespace sdsim
