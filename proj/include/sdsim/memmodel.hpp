#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sdsim/errors.hpp"

namespace sdsim {

struct EnergyConfig {
    double reram_pj_per_byte = 4.0;
    double dram_pj_per_byte = 40.0;
    double pj_per_mac = 0.5;
};

// Stacked-memory system parameters. Defaults give 25.6 GB/s per chip
// (2048 bump bits at 100 MHz) and 8 MiB per chip across 4 dies.
struct StackConfig {
    int dies_per_chip = 4;
    int64_t capacity_per_die_bytes = 2 * 1024 * 1024;
    int bump_bits_per_cycle = 2048;
    double reram_clock_hz = 1e8;
    int bank_width_bits = 512;
    int banks_per_die = 8;
    int chips = 1;
    double dram_bandwidth_bytes_per_s = 12.8e9;
    EnergyConfig energy;

    // Per-chip peak over the stacking interface.
    double reram_peak_bandwidth() const {
        return static_cast<double>(bump_bits_per_cycle) / 8.0 * reram_clock_hz;
    }
    int64_t total_capacity_bytes() const {
        return static_cast<int64_t>(dies_per_chip) * capacity_per_die_bytes * chips;
    }
    void validate() const;
};

enum class CbMapping { vertical, horizontal };

// Where codebook entries live. Vertical mapping stripes each entry across
// all dies at the same bank/row so one cycle reads a slice from every die;
// horizontal keeps an entry within one die.
struct CbLayout {
    CbMapping mode = CbMapping::vertical;
    int64_t entry_bits = 512;
    int num_entries = 16;
    bool cilm = false;  // round-robin codebook interleaving across chips
};

// Cycles to read one codebook entry.
int64_t reram_read_cycles(int64_t entry_bits, const StackConfig& config, CbMapping mode);

// One bank-row slice of a codebook entry.
struct SlicePlacement {
    int chip = 0;
    int die = 0;
    int bank = 0;
    int64_t row = 0;
};

// Concrete placement of an entry's slices. Vertical mapping stripes slices
// across every die at the same bank/row; horizontal mapping walks rows within
// a single die. With CILM on, entries round-robin across chips.
std::vector<SlicePlacement> entry_placement(const CbLayout& layout, const StackConfig& config,
                                            int entry_id);

// Ordered (tile id, codebook entry id) accesses for one layer.
struct FetchTrace {
    std::vector<std::pair<int, int>> accesses;
};

struct FusedFetchResult {
    int64_t naive_cycles = 0;  // every access fetches
    int64_t fused_cycles = 0;  // each distinct entry fetched once
};

FusedFetchResult fused_fetch_cycles(const FetchTrace& trace, const CbLayout& layout,
                                    const StackConfig& config);

// Effective codebook-loading bandwidth. CILM spreads a layer's codebooks
// round-robin across chips, so loading runs at the aggregate peak; without
// it the worst case is one chip's peak.
double cilm_bandwidth(const CbLayout& layout, const StackConfig& config);

struct TimeEnergy {
    double seconds = 0.0;
    double joules = 0.0;
};

// External (DRAM) weight traffic, linear bandwidth/energy model.
TimeEnergy ema_time_and_energy(int64_t bytes, const StackConfig& config);

}  // namespace sdsim
