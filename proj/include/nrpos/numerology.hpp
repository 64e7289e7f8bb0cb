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

#include <cstdint>
#include <span>
#include <vector>

namespace nrpos
{

// NR basic time unit: 1 / (480 kHz * 4096).
constexpr double tc_seconds = 1.0 / (480e3 * 4096.0);

constexpr int subcarriers_per_prb = 12;
constexpr int symbols_per_slot = 14;

enum class BandwidthCheck
{
    grid,  // any positive PRB count
    prs,   // 24..276 PRBs in steps of 4
};

// Occupied bandwidth n_prb * 12 * scs.
double bandwidth_hz(int n_prb, int scs_khz, BandwidthCheck check = BandwidthCheck::grid);

// Validates a DL-PRS bandwidth (24..276 PRBs, step 4). Throws std::invalid_argument.
void validate_prs_bandwidth(int n_prb);

struct Numerology
{
    int scs_khz = 30;
    int n_prb = 272;
    int fft_size = 4096;
    int cp_samples = 288;

    // Smallest power-of-two FFT that fits 12 * n_prb subcarriers, normal CP.
    static Numerology make(int scs_khz, int n_prb);

    int mu() const;
    int subcarriers() const { return subcarriers_per_prb * n_prb; }
    double scs_hz() const { return scs_khz * 1e3; }
    double sample_rate_hz() const { return static_cast<double>(fft_size) * scs_hz(); }
    double sample_period_s() const { return 1.0 / sample_rate_hz(); }
    double slot_duration_s() const { return 1e-3 / (scs_khz / 15.0); }
    int slots_per_ms() const { return scs_khz / 15; }
    int samples_per_symbol() const { return fft_size + cp_samples; }

    // Baseband frequency of grid subcarrier k (grid centred on DC).
    double subcarrier_frequency_hz(int k) const { return (k - subcarriers() / 2) * scs_hz(); }

    void validate() const;
};

// Time-frequency grid of one slot (or any number of symbols). Dimensions are
// fixed at construction. Every mapped RE is flagged as occupied so mapping
// collisions and measured RE sets can be recovered from the grid itself.
class ResourceGrid
{
public:
    ResourceGrid() = default;
    ResourceGrid(int subcarriers, int symbols);

    static ResourceGrid for_slot(const Numerology &num) { return {num.subcarriers(), symbols_per_slot}; }

    int subcarriers() const { return subcarriers_; }
    int symbols() const { return symbols_; }

    const cx &at(int k, int l) const;
    cx &at(int k, int l);

    bool occupied(int k, int l) const;
    void set_occupied(int k, int l, bool occ = true);

    // Writes a value and flags the RE as occupied.
    void put(int k, int l, cx value);

    std::size_t occupied_count() const;
    double energy() const;

    std::span<const cx> cells() const { return cells_; }
    std::span<cx> cells() { return cells_; }
    std::span<const std::uint8_t> occupancy() const { return occupied_; }

    std::size_t index(int k, int l) const { return static_cast<std::size_t>(l) * subcarriers_ + k; }

    bool operator==(const ResourceGrid &) const = default;

private:
    void check(int k, int l) const;

    int subcarriers_ = 0;
    int symbols_ = 0;
    std::vector<cx> cells_;
    std::vector<std::uint8_t> occupied_;
};

// Per-symbol IFFT with cyclic prefix. Output energy of the useful part of each
// symbol equals the grid energy of that symbol (unitary transform).
std::vector<cx> ofdm_modulate(const ResourceGrid &grid, const Numerology &num);

// Inverse of ofdm_modulate: drops the CP and takes a unitary FFT per symbol.
ResourceGrid ofdm_demodulate(std::span<const cx> waveform, const Numerology &num);

} // namespace nrpos
