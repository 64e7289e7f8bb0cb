// SPDX-License-Identifier: Apache-2.0
//
// nrpos: 5G NR positioning signals, measurements and solvers
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "nrpos/common.hpp"
#include "nrpos/numerology.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace nrpos
{

// ---- Sequences -----------------------------------------------------------

// Length-31 Gold sequence: x1 with feedback x^31 + x^3 + 1 seeded with 1,
// x2 with feedback x^31 + x^3 + x^2 + x + 1 seeded with c_init, output
// x1 xor x2 after discarding the first 1600 outputs.
std::vector<std::uint8_t> gold_sequence(std::uint32_t c_init, std::size_t length);

constexpr int max_prs_sequence_id = 4095;

// PRS scrambling initialisation for a symbol:
//   (2^22 floor(id / 1024) + 2^10 (14 slot + symbol + 1)(2 (id mod 1024) + 1) + id mod 1024) mod 2^31
// The low ten bits carry id mod 1024 and bits 22.. carry floor(id / 1024), so
// the map is injective in id for any fixed (slot, symbol).
std::uint32_t prs_c_init(int seq_id, int slot, int symbol);

// (b0, b1) -> ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)
std::vector<cx> qpsk_map(std::span<const std::uint8_t> bits);

// ---- Comb patterns -------------------------------------------------------

// Per-symbol relative RE offsets of the staggered DL-PRS comb.
std::span<const int> prs_relative_offsets(int comb_size);

// True for the (comb, n_symbols) pairs a DL-PRS resource may use.
bool valid_prs_comb(int comb_size, int n_symbols);

// Subcarrier residue (mod comb) occupied in each PRS symbol.
std::vector<int> comb_pattern(int comb_size, int n_symbols, int re_offset);

// ---- Configuration hierarchy ---------------------------------------------

struct DlPrsResource
{
    int resource_id = 0;
    int seq_id = 0;
    int comb_size = 12;
    int re_offset = 0;
    int first_symbol = 0;
    int n_symbols = 12;
    int start_prb = 0;
    int n_prb = 272;
    double beam_azimuth_deg = 0.0;
    double beam_zenith_deg = 90.0;

    void validate() const;
    bool operator==(const DlPrsResource &) const = default;
};

enum class RepetitionOrder
{
    repeat_before_sweep,
    sweep_before_repeat,
};

enum class PeriodUnit
{
    ms,
    slots,
};

constexpr std::size_t max_resources_per_set = 64;
constexpr int max_repetitions = 32;

struct DlPrsResourceSet
{
    int set_id = 0;
    std::vector<DlPrsResource> resources;
    double period = 4.0;  // T_per, range 4..10240 in the chosen unit
    PeriodUnit period_unit = PeriodUnit::ms;
    int gap_slots = 1;    // T_gap
    int repetitions = 1;  // T_rep
    std::vector<std::uint8_t> muting_repetition;  // empty or length T_rep; 0 = muted
    std::vector<std::uint8_t> muting_occasion;    // empty or per-period bitmap; 0 = muted
    RepetitionOrder order = RepetitionOrder::repeat_before_sweep;

    void validate() const;
    int period_slots(const Numerology &num) const;
    bool operator==(const DlPrsResourceSet &) const = default;
};

struct TrpPrsConfig
{
    int trp_id = 0;
    std::vector<DlPrsResourceSet> sets;  // at most 2 per frequency layer
    bool operator==(const TrpPrsConfig &) const = default;
};

struct FrequencyLayer
{
    int layer_id = 0;
    std::vector<TrpPrsConfig> trps;  // at most 64
    bool operator==(const FrequencyLayer &) const = default;
};

constexpr std::size_t max_frequency_layers = 4;
constexpr std::size_t max_trps_per_layer = 64;
constexpr std::size_t max_sets_per_trp_per_layer = 2;

struct PrsConfigTree
{
    std::vector<FrequencyLayer> layers;

    // Throws std::invalid_argument naming the first violated limit.
    void validate() const;
    std::size_t total_resources() const;
    bool operator==(const PrsConfigTree &) const = default;
};

// ---- Grid mapping and scheduling -----------------------------------------

// QPSK Gold-sequence symbols of one PRS symbol (length 12 n_prb / comb).
std::vector<cx> prs_symbol_sequence(const DlPrsResource &res, int slot, int symbol);

// Maps the resource into the grid with unit power per RE. Throws
// std::invalid_argument if any target RE is already occupied or the resource
// does not fit.
void map_dl_prs(ResourceGrid &grid, const DlPrsResource &res, int slot);

struct Occasion
{
    int slot = 0;
    int resource_id = 0;
    int repetition = 0;
    int period_index = 0;
    bool transmitted = true;
    bool operator==(const Occasion &) const = default;
};

// Expands a resource set into individual transmissions up to horizon_slots.
std::vector<Occasion> schedule_occasions(const DlPrsResourceSet &set, int horizon_slots, const Numerology &num);

} // namespace nrpos
