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
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

using namespace nrpos;
using Catch::Approx;

TEST_CASE("bandwidth arithmetic", "[numerology]")
{
    CHECK(bandwidth_hz(276, 30) == Approx(99.36e6).epsilon(1e-12));
    CHECK(bandwidth_hz(276, 120) == Approx(397.44e6).epsilon(1e-12));
    CHECK(bandwidth_hz(24, 30) == Approx(8.64e6).epsilon(1e-12));
    CHECK(bandwidth_hz(272, 30) == Approx(97.92e6).epsilon(1e-12));
    CHECK_THROWS_AS(bandwidth_hz(0, 30), std::invalid_argument);
    CHECK_THROWS_AS(bandwidth_hz(24, 45), std::invalid_argument);
}

TEST_CASE("PRS bandwidth validation", "[numerology]")
{
    for (int n = 24; n <= 276; n += 4)
        CHECK_NOTHROW(validate_prs_bandwidth(n));
    CHECK_THROWS_AS(validate_prs_bandwidth(20), std::invalid_argument);
    CHECK_THROWS_AS(validate_prs_bandwidth(280), std::invalid_argument);
    CHECK_THROWS_AS(validate_prs_bandwidth(26), std::invalid_argument);
    CHECK_THROWS_AS(bandwidth_hz(26, 30, BandwidthCheck::prs), std::invalid_argument);
    CHECK(bandwidth_hz(26, 30, BandwidthCheck::grid) > 0.0);
}

TEST_CASE("numerology invariants", "[numerology]")
{
    for (int scs : {15, 30, 60, 120})
        for (int n_prb : {24, 100, 272, 276})
        {
            const Numerology num = Numerology::make(scs, n_prb);
            CHECK(num.fft_size >= 12 * n_prb);
            CHECK((num.fft_size & (num.fft_size - 1)) == 0);
            CHECK(num.slot_duration_s() == Approx(1e-3 / (scs / 15.0)));
            CHECK(num.sample_rate_hz() == Approx(num.fft_size * scs * 1000.0));
        }
    CHECK(Numerology::make(30, 272).fft_size == 4096);
    CHECK(Numerology::make(120, 272).fft_size == 4096);
    Numerology bad = Numerology::make(30, 272);
    bad.fft_size = 2048;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("Tc matches the rounded 0.51 ns", "[numerology]")
{
    CHECK(tc_seconds == Approx(0.50863e-9).epsilon(1e-4));
    CHECK(std::abs(tc_seconds - 0.51e-9) / 0.51e-9 < 0.003);
}

TEST_CASE("resource grid bounds", "[numerology]")
{
    ResourceGrid g(24, 14);
    CHECK_THROWS_AS(g.at(24, 0), std::out_of_range);
    CHECK_THROWS_AS(g.at(0, 14), std::out_of_range);
    CHECK_THROWS_AS(g.at(-1, 0), std::out_of_range);
    CHECK_THROWS_AS(ResourceGrid(0, 14), std::invalid_argument);
    g.put(3, 2, {1.0, 0.0});
    CHECK(g.occupied(3, 2));
    CHECK(g.occupied_count() == 1);
}

namespace
{

Numerology small_numerology()
{
    Numerology n;
    n.scs_khz = 30;
    n.n_prb = 4;
    n.fft_size = 64;
    n.cp_samples = 8;
    return n;
}

ResourceGrid random_grid(oracle::Gen &g, const Numerology &num, int symbols)
{
    ResourceGrid grid(num.subcarriers(), symbols);
    for (int l = 0; l < symbols; ++l)
        for (int k = 0; k < num.subcarriers(); ++k)
            grid.put(k, l, g.complex_normal());
    return grid;
}

} // namespace

TEST_CASE("OFDM zero and tone", "[numerology]")
{
    const Numerology num = small_numerology();
    ResourceGrid g(num.subcarriers(), 2);
    for (const cx &v : ofdm_modulate(g, num))
        CHECK(std::abs(v) == 0.0);
    g.put(0, 0, {1.0, 0.0});
    const auto w = ofdm_modulate(g, num);
    REQUIRE(w.size() == 2u * (num.fft_size + num.cp_samples));
    const double m0 = std::abs(w[0]);
    for (int n = 0; n < num.fft_size + num.cp_samples; ++n)
        CHECK(std::abs(w[n]) == Approx(m0).epsilon(1e-12));
    const std::vector<cx> zero(w.size());
    CHECK(ofdm_demodulate(zero, num).energy() == 0.0);
}

TEST_CASE("OFDM matches a direct DFT", "[numerology]")
{
    const Numerology num = small_numerology();
    oracle::Gen gen(5);
    const ResourceGrid g = random_grid(gen, num, 1);
    const auto w = ofdm_modulate(g, num);
    std::vector<cx> bins(num.fft_size);
    for (int k = 0; k < num.subcarriers(); ++k)
    {
        const int m = k - num.subcarriers() / 2;
        bins[(m + num.fft_size) % num.fft_size] = g.at(k, 0);
    }
    const auto ref = oracle::dft(bins, true);
    for (int n = 0; n < num.fft_size; ++n)
        CHECK(std::abs(w[num.cp_samples + n] - ref[n] / std::sqrt(64.0)) < 1e-12);
}

TEST_CASE("property: OFDM round trip and Parseval", "[numerology][property]")
{
    for (std::uint64_t seed = 0; seed < 100; ++seed)
    {
        oracle::Gen gen(seed);
        const Numerology num = seed % 10 == 0 ? Numerology::make(30, 272) : small_numerology();
        const int symbols = gen.integer(1, 3);
        const ResourceGrid g = random_grid(gen, num, symbols);
        const auto w = ofdm_modulate(g, num);
        REQUIRE(w.size() == static_cast<std::size_t>(symbols) * (num.fft_size + num.cp_samples));
        const ResourceGrid back = ofdm_demodulate(w, num);
        double err = 0.0;
        for (int l = 0; l < symbols; ++l)
            for (int k = 0; k < num.subcarriers(); ++k)
                err += std::norm(back.at(k, l) - g.at(k, l));
        CHECK(std::sqrt(err / g.energy()) < 1e-9);
        double useful = 0.0;
        for (int l = 0; l < symbols; ++l)
            for (int n = 0; n < num.fft_size; ++n)
                useful += std::norm(w[l * (num.fft_size + num.cp_samples) + num.cp_samples + n]);
        CHECK(std::abs(useful - g.energy()) / g.energy() < 1e-9);
    }
}

TEST_CASE("OFDM delay is a phase ramp", "[numerology]")
{
    const Numerology num = small_numerology();
    oracle::Gen gen(11);
    const ResourceGrid g = random_grid(gen, num, 1);
    const auto w = ofdm_modulate(g, num);
    const int d = 3;  // within the cyclic prefix
    std::vector<cx> delayed(w.size());
    for (std::size_t n = 0; n < w.size(); ++n)
        delayed[n] = n >= static_cast<std::size_t>(d) ? w[n - d] : w[n + w.size() - d];
    const ResourceGrid r = ofdm_demodulate(delayed, num);
    for (int k = 0; k < num.subcarriers(); ++k)
    {
        const int m = k - num.subcarriers() / 2;
        const cx expect = g.at(k, 0) * std::polar(1.0, -2.0 * oracle::pi * m * d / num.fft_size);
        CHECK(std::abs(r.at(k, 0) - expect) < 1e-9);
    }
}

TEST_CASE("OFDM error paths", "[numerology]")
{
    const Numerology num = small_numerology();
    CHECK_THROWS_AS(ofdm_modulate(ResourceGrid(128, 1), num), std::invalid_argument);
    CHECK_THROWS_AS(ofdm_demodulate(std::vector<cx>(71), num), std::invalid_argument);
}
