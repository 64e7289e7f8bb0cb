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

#include "nrpos/srs.hpp"

#include <array>
#include <numeric>
#include <stdexcept>
#include <string>

namespace nrpos
{

std::vector<cx> zc_sequence(int root, int length)
{
    if (length < 3)
        throw std::invalid_argument("zc_sequence: length must be at least 3");
    if (root <= 0 || std::gcd(root, length) != 1)
        throw std::invalid_argument("zc_sequence: root " + std::to_string(root) + " not coprime with length " +
                                    std::to_string(length));
    std::vector<cx> x(static_cast<std::size_t>(length));
    const bool odd = length % 2 != 0;
    for (int n = 0; n < length; ++n)
    {
        // Reduce the quadratic index modulo 2L in integers to keep the phase exact.
        const long long L2 = 2LL * length;
        const long long nn = odd ? (static_cast<long long>(n) * (n + 1)) % L2 : (static_cast<long long>(n) * n) % L2;
        const long long idx = (static_cast<long long>(root) % L2) * nn % L2;
        x[static_cast<std::size_t>(n)] = std::polar(1.0, -pi * static_cast<double>(idx) / length);
    }
    return x;
}

int largest_prime_at_most(int n)
{
    if (n < 2)
        throw std::invalid_argument("largest_prime_at_most: n < 2");
    auto is_prime = [](int v) {
        if (v < 2)
            return false;
        for (int d = 2; d * d <= v; ++d)
            if (v % d == 0)
                return false;
        return true;
    };
    while (!is_prime(n))
        --n;
    return n;
}

void SrsPosResource::validate() const
{
    const std::string tag = "SRS resource " + std::to_string(resource_id) + ": ";
    if (comb_size != 2 && comb_size != 4 && comb_size != 8)
        throw std::invalid_argument(tag + "comb size must be 2, 4 or 8");
    if (comb_offset < 0 || comb_offset >= comb_size)
        throw std::invalid_argument(tag + "comb offset outside [0, K_TC - 1]");
    if (cyclic_shift < 0 || cyclic_shift >= srs_cyclic_shift_max)
        throw std::invalid_argument(tag + "cyclic shift outside 0..11");
    if (n_symbols != 1 && n_symbols != 2 && n_symbols != 4 && n_symbols != 8 && n_symbols != 12)
        throw std::invalid_argument(tag + "symbol count must be one of {1,2,4,8,12}");
    if (first_symbol < 0 || first_symbol + n_symbols > symbols_per_slot)
        throw std::invalid_argument(tag + "symbols exceed the slot");
    if (n_prb <= 0 || start_prb < 0)
        throw std::invalid_argument(tag + "invalid PRB allocation");
    if (sequence_length() < 3)
        throw std::invalid_argument(tag + "allocation too narrow for a ZC sequence");
}

std::vector<int> srs_comb_pattern(int comb_size, int n_symbols, int comb_offset)
{
    static constexpr std::array<int, 2> c2{0, 1};
    static constexpr std::array<int, 4> c4{0, 2, 1, 3};
    static constexpr std::array<int, 8> c8{0, 4, 2, 6, 1, 5, 3, 7};
    std::span<const int> rel;
    switch (comb_size)
    {
    case 2: rel = c2; break;
    case 4: rel = c4; break;
    case 8: rel = c8; break;
    default: throw std::invalid_argument("srs_comb_pattern: comb size must be 2, 4 or 8");
    }
    if (comb_offset < 0 || comb_offset >= comb_size)
        throw std::invalid_argument("srs_comb_pattern: comb offset out of range");
    std::vector<int> out(static_cast<std::size_t>(n_symbols));
    for (int s = 0; s < n_symbols; ++s)
        out[static_cast<std::size_t>(s)] = (comb_offset + rel[static_cast<std::size_t>(s % comb_size)]) % comb_size;
    return out;
}

std::vector<cx> srs_sequence(const SrsPosResource &res)
{
    res.validate();
    const int m = res.sequence_length();
    const int l = largest_prime_at_most(m);
    const int root = 1 + (res.zc_root - 1) % (l - 1);
    const auto base = zc_sequence(root, l);
    std::vector<cx> out(static_cast<std::size_t>(m));
    for (int n = 0; n < m; ++n)
    {
        const double phase = 2.0 * pi * static_cast<double>((res.cyclic_shift * n) % srs_cyclic_shift_max) /
                             srs_cyclic_shift_max;
        out[static_cast<std::size_t>(n)] = base[static_cast<std::size_t>(n % l)] * std::polar(1.0, phase);
    }
    return out;
}

void map_srs(ResourceGrid &grid, const SrsPosResource &res)
{
    res.validate();
    const int k0 = res.start_prb * subcarriers_per_prb;
    const int width = res.n_prb * subcarriers_per_prb;
    if (k0 + width > grid.subcarriers() || res.first_symbol + res.n_symbols > grid.symbols())
        throw std::invalid_argument("map_srs: resource " + std::to_string(res.resource_id) + " does not fit the grid");
    const auto residues = srs_comb_pattern(res.comb_size, res.n_symbols, res.comb_offset);
    for (int s = 0; s < res.n_symbols; ++s)
        for (int k = residues[static_cast<std::size_t>(s)]; k < width; k += res.comb_size)
            if (grid.occupied(k0 + k, res.first_symbol + s))
                throw std::invalid_argument("map_srs: resource " + std::to_string(res.resource_id) +
                                            " collides with an occupied RE");
    const auto seq = srs_sequence(res);
    for (int s = 0; s < res.n_symbols; ++s)
    {
        std::size_t m = 0;
        for (int k = residues[static_cast<std::size_t>(s)]; k < width; k += res.comb_size)
            grid.put(k0 + k, res.first_symbol + s, seq[m++]);
    }
}

} // namespace nrpos
