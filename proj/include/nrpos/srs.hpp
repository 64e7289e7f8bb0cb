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

#include <span>
#include <vector>

namespace nrpos
{

// Zadoff-Chu sequence of root q and length L (gcd(q, L) = 1, L >= 3):
//   odd L:  x[n] = exp(-j pi q n (n + 1) / L)
//   even L: x[n] = exp(-j pi q n^2 / L)
std::vector<cx> zc_sequence(int root, int length);

// Largest prime not above n (n >= 2).
int largest_prime_at_most(int n);

constexpr int srs_cyclic_shift_max = 12;

struct SrsPosResource
{
    int resource_id = 0;
    int comb_size = 2;      // K_TC in {2, 4, 8}
    int comb_offset = 0;    // 0..K_TC-1
    int cyclic_shift = 0;   // 0..11
    int n_symbols = 2;      // {1, 2, 4, 8, 12}
    int first_symbol = 0;
    int zc_root = 1;
    int start_prb = 0;
    int n_prb = 272;

    void validate() const;
    int sequence_length() const { return n_prb * subcarriers_per_prb / comb_size; }
    bool operator==(const SrsPosResource &) const = default;
};

// Per-symbol comb residues; K_TC consecutive symbols sound every subcarrier.
std::vector<int> srs_comb_pattern(int comb_size, int n_symbols, int comb_offset);

// ZC base sequence (largest prime length, cyclically extended) with the
// cyclic-shift phase ramp exp(j 2 pi cs n / 12) applied.
std::vector<cx> srs_sequence(const SrsPosResource &res);

// Maps the SRS resource into the grid. Throws on collision or misfit.
void map_srs(ResourceGrid &grid, const SrsPosResource &res);

} // namespace nrpos
