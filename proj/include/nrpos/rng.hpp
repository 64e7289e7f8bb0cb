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
#include <initializer_list>
#include <random>

namespace nrpos
{

// Stream purposes for substream derivation. Values are part of the seeding
// contract: changing them changes every simulated result.
enum class Stream : std::uint64_t
{
    deployment = 1,
    ue_drop = 2,
    link = 3,
    noise = 4,
    clock = 5,
    sync_error = 6,
    snapshot = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derive a seed from a master seed, a purpose and a path of indices.
// Independent of evaluation order, so parallel and serial runs see the same
// streams.
inline std::uint64_t substream_seed(std::uint64_t master, Stream purpose, std::initializer_list<std::uint64_t> path)
{
    std::uint64_t h = splitmix64(master ^ (static_cast<std::uint64_t>(purpose) * 0xd6e8feb86659fd93ULL));
    for (std::uint64_t p : path)
        h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return h;
}

inline std::mt19937_64 substream(std::uint64_t master, Stream purpose, std::initializer_list<std::uint64_t> path)
{
    return std::mt19937_64(substream_seed(master, purpose, path));
}

// Counter-based complex Gaussian: the value at `index` depends only on
// (seed, index). Unit variance (0.5 per component).
inline cx counter_gaussian(std::uint64_t seed, std::uint64_t index)
{
    const std::uint64_t a = splitmix64(seed ^ splitmix64(2 * index));
    const std::uint64_t b = splitmix64(seed ^ splitmix64(2 * index + 1));
    // 53-bit uniforms in (0, 1]
    const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-std::log(u1));
    return {r * std::cos(2.0 * pi * u2), r * std::sin(2.0 * pi * u2)};
}

} // namespace nrpos
