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

#include "nrpos/prs.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <stdexcept>
#include <string>

namespace nrpos
{

namespace
{

constexpr int gold_warmup = 1600;

std::invalid_argument config_error(const std::string &what) { return std::invalid_argument(what); }

} // namespace

std::vector<std::uint8_t> gold_sequence(std::uint32_t c_init, std::size_t length)
{
    // Bit i of each register holds x(n + i); stepping shifts right and
    // inserts the new x(n + 31) at bit 30.
    std::uint32_t x1 = 1;
    std::uint32_t x2 = c_init & 0x7fffffffU;
    auto step = [&] {
        const std::uint32_t f1 = ((x1 >> 3) ^ x1) & 1U;
        const std::uint32_t f2 = ((x2 >> 3) ^ (x2 >> 2) ^ (x2 >> 1) ^ x2) & 1U;
        x1 = (x1 >> 1) | (f1 << 30);
        x2 = (x2 >> 1) | (f2 << 30);
    };
    for (int i = 0; i < gold_warmup; ++i)
        step();
    std::vector<std::uint8_t> out(length);
    for (auto &b : out)
    {
        b = static_cast<std::uint8_t>((x1 ^ x2) & 1U);
        step();
    }
    return out;
}

std::uint32_t prs_c_init(int seq_id, int slot, int symbol)
{
    if (seq_id < 0 || seq_id > max_prs_sequence_id)
        throw std::invalid_argument("prs_c_init: sequence id " + std::to_string(seq_id) + " outside 0..4095");
    if (slot < 0 || symbol < 0 || symbol >= symbols_per_slot)
        throw std::invalid_argument("prs_c_init: invalid slot/symbol");
    const std::uint64_t id = static_cast<std::uint64_t>(seq_id);
    const std::uint64_t t = static_cast<std::uint64_t>(symbols_per_slot) * static_cast<std::uint64_t>(slot) +
                            static_cast<std::uint64_t>(symbol) + 1U;
    const std::uint64_t v = (id / 1024U << 22) + (t * (2U * (id % 1024U) + 1U) << 10) + id % 1024U;
    return static_cast<std::uint32_t>(v & 0x7fffffffULL);
}

std::vector<cx> qpsk_map(std::span<const std::uint8_t> bits)
{
    if (bits.size() % 2 != 0)
        throw std::invalid_argument("qpsk_map: odd number of bits");
    const double a = 1.0 / std::sqrt(2.0);
    std::vector<cx> out(bits.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = {a * (1.0 - 2.0 * bits[2 * i]), a * (1.0 - 2.0 * bits[2 * i + 1])};
    return out;
}

std::span<const int> prs_relative_offsets(int comb_size)
{
    static constexpr std::array<int, 2> c2{0, 1};
    static constexpr std::array<int, 4> c4{0, 2, 1, 3};
    static constexpr std::array<int, 6> c6{0, 3, 1, 4, 2, 5};
    static constexpr std::array<int, 12> c12{0, 6, 3, 9, 1, 7, 4, 10, 2, 8, 5, 11};
    switch (comb_size)
    {
    case 2: return c2;
    case 4: return c4;
    case 6: return c6;
    case 12: return c12;
    default: throw std::invalid_argument("unsupported DL-PRS comb size " + std::to_string(comb_size));
    }
}

bool valid_prs_comb(int comb_size, int n_symbols)
{
    switch (comb_size)
    {
    case 2: return n_symbols == 2 || n_symbols == 4 || n_symbols == 6 || n_symbols == 12;
    case 4: return n_symbols == 4 || n_symbols == 12;
    case 6: return n_symbols == 6 || n_symbols == 12;
    case 12: return n_symbols == 12;
    default: return false;
    }
}

std::vector<int> comb_pattern(int comb_size, int n_symbols, int re_offset)
{
    if (!valid_prs_comb(comb_size, n_symbols))
        throw std::invalid_argument("comb_pattern: invalid combination comb-" + std::to_string(comb_size) + " with " +
                                    std::to_string(n_symbols) + " symbols");
    if (re_offset < 0 || re_offset >= comb_size)
        throw std::invalid_argument("comb_pattern: RE offset out of range");
    const auto rel = prs_relative_offsets(comb_size);
    std::vector<int> out(static_cast<std::size_t>(n_symbols));
    for (int s = 0; s < n_symbols; ++s)
        out[static_cast<std::size_t>(s)] = (re_offset + rel[static_cast<std::size_t>(s % comb_size)]) % comb_size;
    return out;
}

void DlPrsResource::validate() const
{
    const std::string tag = "DL-PRS resource " + std::to_string(resource_id) + ": ";
    if (seq_id < 0 || seq_id > max_prs_sequence_id)
        throw config_error(tag + "sequence id outside 0..4095");
    if (!valid_prs_comb(comb_size, n_symbols))
        throw config_error(tag + "invalid comb-" + std::to_string(comb_size) + " / " + std::to_string(n_symbols) +
                           " symbol combination");
    if (re_offset < 0 || re_offset >= comb_size)
        throw config_error(tag + "RE offset must be below the comb size");
    if (first_symbol < 0 || first_symbol + n_symbols > symbols_per_slot)
        throw config_error(tag + "symbols exceed the slot");
    if (start_prb < 0)
        throw config_error(tag + "negative start PRB");
    try
    {
        validate_prs_bandwidth(n_prb);
    }
    catch (const std::invalid_argument &e)
    {
        throw config_error(tag + e.what());
    }
}

void DlPrsResourceSet::validate() const
{
    const std::string tag = "DL-PRS resource set " + std::to_string(set_id) + ": ";
    if (resources.empty())
        throw config_error(tag + "no resources");
    if (resources.size() > max_resources_per_set)
        throw config_error(tag + "more than 64 resources");
    if (period < 4.0 || period > 10240.0)
        throw config_error(tag + "period outside 4..10240");
    if (repetitions < 1 || repetitions > max_repetitions)
        throw config_error(tag + "repetition factor outside 1..32");
    if (gap_slots < 1)
        throw config_error(tag + "gap must be at least one slot");
    if (!muting_repetition.empty() && muting_repetition.size() != static_cast<std::size_t>(repetitions))
        throw config_error(tag + "repetition muting bitmap length differs from the repetition factor");
    std::set<int> ids;
    for (const auto &r : resources)
    {
        r.validate();
        if (!ids.insert(r.resource_id).second)
            throw config_error(tag + "duplicate resource id " + std::to_string(r.resource_id));
    }
    if (order == RepetitionOrder::sweep_before_repeat && repetitions > 1 &&
        gap_slots < static_cast<int>(resources.size()))
        throw config_error(tag + "sweep-before-repeat needs a gap of at least one sweep");
}

int DlPrsResourceSet::period_slots(const Numerology &num) const
{
    const double slots = period_unit == PeriodUnit::ms ? period * num.slots_per_ms() : period;
    return static_cast<int>(std::lround(slots));
}

void PrsConfigTree::validate() const
{
    if (layers.size() > max_frequency_layers)
        throw config_error("PRS config: more than 4 frequency layers");
    std::set<int> layer_ids;
    for (const auto &layer : layers)
    {
        const std::string tag = "PRS config layer " + std::to_string(layer.layer_id) + ": ";
        if (!layer_ids.insert(layer.layer_id).second)
            throw config_error(tag + "duplicate layer id");
        if (layer.trps.size() > max_trps_per_layer)
            throw config_error(tag + "more than 64 TRPs");
        std::set<int> trp_ids;
        for (const auto &trp : layer.trps)
        {
            if (!trp_ids.insert(trp.trp_id).second)
                throw config_error(tag + "duplicate TRP id " + std::to_string(trp.trp_id));
            if (trp.sets.size() > max_sets_per_trp_per_layer)
                throw config_error(tag + "TRP " + std::to_string(trp.trp_id) + " has more than 2 resource sets");
            std::set<int> set_ids;
            for (const auto &set : trp.sets)
            {
                if (!set_ids.insert(set.set_id).second)
                    throw config_error(tag + "TRP " + std::to_string(trp.trp_id) + " duplicate set id " +
                                       std::to_string(set.set_id));
                set.validate();
            }
        }
    }
}

std::size_t PrsConfigTree::total_resources() const
{
    std::size_t n = 0;
    for (const auto &layer : layers)
        for (const auto &trp : layer.trps)
            for (const auto &set : trp.sets)
                n += set.resources.size();
    return n;
}

std::vector<cx> prs_symbol_sequence(const DlPrsResource &res, int slot, int symbol)
{
    const auto n = static_cast<std::size_t>(res.n_prb * subcarriers_per_prb / res.comb_size);
    const auto bits = gold_sequence(prs_c_init(res.seq_id, slot, symbol), 2 * n);
    return qpsk_map(bits);
}

void map_dl_prs(ResourceGrid &grid, const DlPrsResource &res, int slot)
{
    res.validate();
    const int k0 = res.start_prb * subcarriers_per_prb;
    const int width = res.n_prb * subcarriers_per_prb;
    if (k0 + width > grid.subcarriers() || res.first_symbol + res.n_symbols > grid.symbols())
        throw std::invalid_argument("map_dl_prs: resource " + std::to_string(res.resource_id) +
                                    " does not fit the grid");
    const auto residues = comb_pattern(res.comb_size, res.n_symbols, res.re_offset);
    // Check first so a collision leaves the grid untouched.
    for (int s = 0; s < res.n_symbols; ++s)
        for (int k = residues[static_cast<std::size_t>(s)]; k < width; k += res.comb_size)
            if (grid.occupied(k0 + k, res.first_symbol + s))
                throw std::invalid_argument("map_dl_prs: resource " + std::to_string(res.resource_id) +
                                            " collides with an occupied RE at (" + std::to_string(k0 + k) + ", " +
                                            std::to_string(res.first_symbol + s) + ")");
    for (int s = 0; s < res.n_symbols; ++s)
    {
        const int l = res.first_symbol + s;
        const auto seq = prs_symbol_sequence(res, slot, l);
        std::size_t m = 0;
        for (int k = residues[static_cast<std::size_t>(s)]; k < width; k += res.comb_size)
            grid.put(k0 + k, l, seq[m++]);
    }
}

std::vector<Occasion> schedule_occasions(const DlPrsResourceSet &set, int horizon_slots, const Numerology &num)
{
    set.validate();
    const int period = set.period_slots(num);
    if (horizon_slots < period)
        throw std::invalid_argument("schedule_occasions: horizon shorter than one period");
    const int n_res = static_cast<int>(set.resources.size());
    const int span = set.order == RepetitionOrder::repeat_before_sweep
                         ? (n_res * set.repetitions - 1) * set.gap_slots + 1
                         : (set.repetitions - 1) * set.gap_slots + n_res;
    if (span > period)
        throw std::invalid_argument("schedule_occasions: repetitions do not fit in one period");

    std::vector<Occasion> out;
    for (int p = 0; p * period < horizon_slots; ++p)
    {
        const bool occasion_on =
            set.muting_occasion.empty() || set.muting_occasion[static_cast<std::size_t>(p) % set.muting_occasion.size()] != 0;
        std::vector<Occasion> in_period;
        for (int i = 0; i < n_res; ++i)
        {
            for (int j = 0; j < set.repetitions; ++j)
            {
                const int offset = set.order == RepetitionOrder::repeat_before_sweep
                                       ? (i * set.repetitions + j) * set.gap_slots
                                       : j * set.gap_slots + i;
                const bool rep_on = set.muting_repetition.empty() || set.muting_repetition[static_cast<std::size_t>(j)] != 0;
                in_period.push_back({p * period + offset, set.resources[static_cast<std::size_t>(i)].resource_id, j, p,
                                     occasion_on && rep_on});
            }
        }
        std::stable_sort(in_period.begin(), in_period.end(),
                         [](const Occasion &a, const Occasion &b) { return a.slot < b.slot; });
        for (const auto &o : in_period)
            if (o.slot < horizon_slots)
                out.push_back(o);
    }
    return out;
}

} // namespace nrpos
