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

#include "nrpos/numerology.hpp"
#include "nrpos/fft.hpp"

#include <bit>
#include <stdexcept>
#include <string>

namespace nrpos
{

double bandwidth_hz(int n_prb, int scs_khz, BandwidthCheck check)
{
    if (check == BandwidthCheck::prs)
        validate_prs_bandwidth(n_prb);
    else if (n_prb <= 0)
        throw std::invalid_argument("bandwidth_hz: n_prb must be positive");
    if (scs_khz != 15 && scs_khz != 30 && scs_khz != 60 && scs_khz != 120)
        throw std::invalid_argument("bandwidth_hz: unsupported subcarrier spacing " + std::to_string(scs_khz));
    return static_cast<double>(n_prb) * subcarriers_per_prb * scs_khz * 1e3;
}

void validate_prs_bandwidth(int n_prb)
{
    if (n_prb < 24 || n_prb > 276 || (n_prb - 24) % 4 != 0)
        throw std::invalid_argument("PRS bandwidth must be 24..276 PRBs in steps of 4, got " + std::to_string(n_prb));
}

Numerology Numerology::make(int scs_khz, int n_prb)
{
    Numerology n;
    n.scs_khz = scs_khz;
    n.n_prb = n_prb;
    if (n_prb <= 0)
        throw std::invalid_argument("Numerology: n_prb must be positive");
    n.fft_size = static_cast<int>(std::bit_ceil(static_cast<unsigned>(std::max(128, subcarriers_per_prb * n_prb))));
    n.cp_samples = 144 * n.fft_size / 2048;
    n.validate();
    return n;
}

int Numerology::mu() const
{
    switch (scs_khz)
    {
    case 15: return 0;
    case 30: return 1;
    case 60: return 2;
    case 120: return 3;
    default: throw std::invalid_argument("unsupported subcarrier spacing " + std::to_string(scs_khz));
    }
}

void Numerology::validate() const
{
    (void)mu();
    if (n_prb <= 0)
        throw std::invalid_argument("Numerology: n_prb must be positive");
    if (fft_size <= 0 || !std::has_single_bit(static_cast<unsigned>(fft_size)))
        throw std::invalid_argument("Numerology: fft_size must be a power of two");
    if (fft_size < subcarriers())
        throw std::invalid_argument("Numerology: fft_size " + std::to_string(fft_size) + " smaller than " +
                                    std::to_string(subcarriers()) + " subcarriers");
    if (cp_samples < 0 || cp_samples >= fft_size)
        throw std::invalid_argument("Numerology: invalid cyclic prefix length");
}

ResourceGrid::ResourceGrid(int subcarriers, int symbols)
    : subcarriers_(subcarriers), symbols_(symbols)
{
    if (subcarriers <= 0 || symbols <= 0)
        throw std::invalid_argument("ResourceGrid: dimensions must be positive");
    const auto n = static_cast<std::size_t>(subcarriers) * static_cast<std::size_t>(symbols);
    cells_.assign(n, cx{});
    occupied_.assign(n, 0);
}

void ResourceGrid::check(int k, int l) const
{
    if (k < 0 || k >= subcarriers_ || l < 0 || l >= symbols_)
        throw std::out_of_range("ResourceGrid: RE (" + std::to_string(k) + ", " + std::to_string(l) +
                                ") outside " + std::to_string(subcarriers_) + "x" + std::to_string(symbols_));
}

const cx &ResourceGrid::at(int k, int l) const
{
    check(k, l);
    return cells_[index(k, l)];
}

cx &ResourceGrid::at(int k, int l)
{
    check(k, l);
    return cells_[index(k, l)];
}

bool ResourceGrid::occupied(int k, int l) const
{
    check(k, l);
    return occupied_[index(k, l)] != 0;
}

void ResourceGrid::set_occupied(int k, int l, bool occ)
{
    check(k, l);
    occupied_[index(k, l)] = occ ? 1 : 0;
}

void ResourceGrid::put(int k, int l, cx value)
{
    check(k, l);
    cells_[index(k, l)] = value;
    occupied_[index(k, l)] = 1;
}

std::size_t ResourceGrid::occupied_count() const
{
    std::size_t n = 0;
    for (auto o : occupied_)
        n += o;
    return n;
}

double ResourceGrid::energy() const
{
    double e = 0.0;
    for (const auto &c : cells_)
        e += std::norm(c);
    return e;
}

namespace
{

std::size_t fft_bin(int k, int n_sc, int fft_size)
{
    const int m = k - n_sc / 2;
    return static_cast<std::size_t>(m >= 0 ? m : m + fft_size);
}

} // namespace

std::vector<cx> ofdm_modulate(const ResourceGrid &grid, const Numerology &num)
{
    num.validate();
    if (grid.subcarriers() > num.fft_size)
        throw std::invalid_argument("ofdm_modulate: grid wider than FFT");
    const int n = num.fft_size, cp = num.cp_samples;
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    std::vector<cx> out;
    out.reserve(static_cast<std::size_t>(grid.symbols()) * (n + cp));
    std::vector<cx> buf(static_cast<std::size_t>(n));
    for (int l = 0; l < grid.symbols(); ++l)
    {
        std::fill(buf.begin(), buf.end(), cx{});
        for (int k = 0; k < grid.subcarriers(); ++k)
            buf[fft_bin(k, grid.subcarriers(), n)] = grid.at(k, l);
        fft::transform(buf, fft::Direction::inverse);
        for (auto &v : buf)
            v *= scale;
        out.insert(out.end(), buf.end() - cp, buf.end());
        out.insert(out.end(), buf.begin(), buf.end());
    }
    return out;
}

ResourceGrid ofdm_demodulate(std::span<const cx> waveform, const Numerology &num)
{
    num.validate();
    const int n = num.fft_size, cp = num.cp_samples;
    const auto per_symbol = static_cast<std::size_t>(n + cp);
    if (waveform.empty() || waveform.size() % per_symbol != 0)
        throw std::invalid_argument("ofdm_demodulate: waveform length " + std::to_string(waveform.size()) +
                                    " is not a multiple of " + std::to_string(per_symbol));
    const int n_symbols = static_cast<int>(waveform.size() / per_symbol);
    ResourceGrid grid(num.subcarriers(), n_symbols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    std::vector<cx> buf(static_cast<std::size_t>(n));
    for (int l = 0; l < n_symbols; ++l)
    {
        const auto start = waveform.begin() + static_cast<std::ptrdiff_t>(l * per_symbol + cp);
        std::copy(start, start + n, buf.begin());
        fft::transform(buf, fft::Direction::forward);
        for (int k = 0; k < grid.subcarriers(); ++k)
            grid.at(k, l) = buf[fft_bin(k, grid.subcarriers(), n)] * scale;
    }
    return grid;
}

} // namespace nrpos
