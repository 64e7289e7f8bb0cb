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

#include "nrpos/channel.hpp"
#include "nrpos/measurements.hpp"
#include "nrpos/prs.hpp"
#include "nrpos/rng.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

using namespace nrpos;
using Catch::Approx;

namespace
{

struct Fixture
{
    Numerology num = Numerology::make(30, 272);
    ResourceGrid tx;
    ReferenceSignal ref;

    explicit Fixture(int comb = 12, int n_prb = 272)
    {
        num = Numerology::make(30, n_prb);
        DlPrsResource r;
        r.comb_size = comb;
        r.n_symbols = 12;
        r.n_prb = n_prb;
        r.seq_id = 7;
        tx = ResourceGrid::for_slot(num);
        map_dl_prs(tx, r, 0);
        ref = ReferenceSignal::from_grid(tx);
    }

    ResourceGrid receive(double delay_s, double power_dbm = 0.0, std::optional<NoiseModel> noise = std::nullopt,
                         std::uint64_t seed = 0) const
    {
        LinkRealization link;
        link.distance_m = delay_s * speed_of_light;
        link.taps.push_back({delay_s, {1.0, 0.0}, {}});
        Contribution c{&tx, &link, power_dbm};
        return received_grid(std::span(&c, 1), noise, num, seed, NoiseFill::occupied);
    }
};

} // namespace

TEST_CASE("TOA of constructed delays", "[measurements]")
{
    const Fixture f;
    const double ts = f.num.sample_period_s();
    auto zero = estimate_toa(f.receive(0.0), f.ref, f.num);
    REQUIRE(zero);
    CHECK(std::abs(zero->toa_s) < 1e-12);

    auto ten = estimate_toa(f.receive(10 * ts), f.ref, f.num);
    REQUIRE(ten);
    CHECK(std::abs(ten->toa_s - 10 * ts) < 1e-12);

    auto frac = estimate_toa(f.receive(10.5 * ts), f.ref, f.num);
    REQUIRE(frac);
    CHECK(std::abs(frac->toa_s - 10.5 * ts) < 0.05 * ts);

    // the parabolic fit alone still meets the interpolation bound
    ToaOptions plain;
    plain.refine = false;
    auto coarse = estimate_toa(f.receive(10.5 * ts), f.ref, f.num, plain);
    REQUIRE(coarse);
    CHECK(std::abs(coarse->toa_s - 10.5 * ts) < 0.05 * ts);
}

TEST_CASE("TOA failure is reported, not invented", "[measurements]")
{
    const Fixture f;
    const ResourceGrid empty = ResourceGrid::for_slot(f.num);
    CHECK_FALSE(estimate_toa(empty, f.ref, f.num).has_value());
    // pure noise does not pass a high threshold
    ResourceGrid noise = ResourceGrid::for_slot(f.num);
    for (const auto &re : f.ref.res)
        noise.put(re.k, re.l, {});
    add_noise(noise, {9.0, 30e3}, 5, NoiseFill::occupied);
    ToaOptions strict;
    strict.noise_sigmas = 30.0;
    CHECK_FALSE(estimate_toa(noise, f.ref, f.num, strict).has_value());
    CHECK_THROWS_AS(estimate_toa(empty, ReferenceSignal{}, f.num), std::invalid_argument);
}

TEST_CASE("TOA picks the earliest significant path", "[measurements]")
{
    const Fixture f;
    const double ts = f.num.sample_period_s();
    LinkRealization link;
    link.taps.push_back({20 * ts, {0.5, 0.0}, {}});
    link.taps.push_back({60 * ts, {1.0, 0.0}, {}});
    Contribution c{&f.tx, &link, 0.0};
    const ResourceGrid rx = received_grid(std::span(&c, 1), std::nullopt, f.num, 0);
    const auto est = estimate_toa(rx, f.ref, f.num);
    REQUIRE(est);
    CHECK(std::abs(est->toa_s - 20 * ts) < 0.05 * ts);
}

TEST_CASE("TOA window may start before zero", "[measurements]")
{
    const Fixture f;
    const double ts = f.num.sample_period_s();
    ToaOptions opt;
    opt.window_min_s = -1e-6;
    const auto est = estimate_toa(f.receive(-7.25 * ts), f.ref, f.num, opt);
    REQUIRE(est);
    CHECK(std::abs(est->toa_s + 7.25 * ts) < 0.01 * ts);
}

TEST_CASE("TOA bias at 20 dB SNR", "[measurements][property]")
{
    const Fixture f(12, 24);
    const double ts = f.num.sample_period_s();
    const NoiseModel noise{0.0, f.num.scs_hz()};
    // per-RE SNR of 20 dB
    const double power = noise.thermal_dbm() + 20.0;
    oracle::Gen g(2);
    double bias = 0.0;
    const int trials = 1000;
    int ok = 0;
    for (int t = 0; t < trials; ++t)
    {
        const double d = g.uniform(5.0, 40.0) * ts;
        const auto est = estimate_toa(f.receive(d, power, noise, 1000 + t), f.ref, f.num);
        if (!est)
            continue;
        ++ok;
        bias += (est->toa_s - d) / ts;
    }
    REQUIRE(ok == trials);
    CHECK(std::abs(bias / trials) < 0.02);
}

TEST_CASE("RSTD and RTT algebra", "[measurements]")
{
    CHECK(rstd(3e-6, 3e-6) == 0.0);
    CHECK(rstd(4e-6 + 1e-6, 2e-6 + 1e-6) == Approx(rstd(4e-6, 2e-6)).margin(1e-18));
    CHECK_FALSE(rstd(std::nullopt, ToaEstimate{}).has_value());

    const double d = 150.0, tof = d / speed_of_light;
    CHECK(rtt(tof, tof).seconds == Approx(1.00069e-6).epsilon(1e-5));
    for (double offset : {-1e-6, 0.0, 1e-6, 3.7e-7})
    {
        // UE clock leads by offset: its Rx-Tx grows, the gNB's shrinks by the same amount
        const auto r = rtt(rx_tx_difference(tof + offset, 0.0), rx_tx_difference(tof, offset));
        CHECK(r.seconds == Approx(2.0 * tof).epsilon(1e-12));
        CHECK_FALSE(r.clamped);
    }
    const auto neg = rtt(-2e-9, 1e-9);
    CHECK(neg.clamped);
    CHECK(neg.seconds == 0.0);
}

TEST_CASE("RSTD of an equidistant UE and a common clock offset", "[measurements]")
{
    Fixture a;
    Fixture b;
    DlPrsResource r;
    r.comb_size = 12;
    r.n_symbols = 12;
    r.n_prb = 272;
    r.seq_id = 8;
    r.re_offset = 1;
    b.tx = ResourceGrid::for_slot(b.num);
    map_dl_prs(b.tx, r, 0);
    b.ref = ReferenceSignal::from_grid(b.tx);
    const double tof = std::hypot(30.0, 20.0) / speed_of_light;
    for (double bias : {0.0, 1e-6})
    {
        ToaOptions opt;
        const auto ta = estimate_toa(a.receive(tof + bias), a.ref, a.num, opt);
        const auto tb = estimate_toa(b.receive(tof + bias), b.ref, b.num, opt);
        const auto v = rstd(ta, tb);
        REQUIRE(v);
        CHECK(std::abs(*v) < 1e-12);
    }
}

TEST_CASE("RSRP", "[measurements]")
{
    const Fixture f(12, 24);
    const ResourceGrid rx = f.receive(1e-7, -80.0);
    CHECK(rsrp_dbm(rx, f.ref) == Approx(-80.0).margin(0.01));
    ReferenceSignal doubled = f.ref;
    doubled.res.insert(doubled.res.end(), f.ref.res.begin(), f.ref.res.end());
    CHECK(rsrp_dbm(rx, doubled) == Approx(rsrp_dbm(rx, f.ref)).margin(1e-12));
    CHECK_THROWS_AS(rsrp_dbm(rx, ReferenceSignal{}), std::invalid_argument);

    // beam toward the UE beats the beam pointing away
    LinkRealization link;
    link.taps.push_back({1e-7, {1.0, 0.0}, {40.0, 95.0}});
    Contribution toward{&f.tx, &link, -80.0};
    toward.beam = BeamPattern{{40.0, 95.0}};
    Contribution away = toward;
    away.beam = BeamPattern{{-140.0, 95.0}};
    const double p_toward = rsrp_dbm(received_grid(std::span(&toward, 1), std::nullopt, f.num, 0), f.ref);
    const double p_away = rsrp_dbm(received_grid(std::span(&away, 1), std::nullopt, f.num, 0), f.ref);
    CHECK(p_toward > p_away);
}

namespace
{

Eigen::MatrixXcd plane_wave(const AntennaArray &arr, Angles dir, std::optional<double> snr_db, std::uint64_t seed,
                            int snapshots = 8)
{
    LinkRealization link;
    link.taps.push_back({1e-7, {1.0, 0.0}, dir});
    const Numerology num = Numerology::make(30, 24);
    std::vector<int> sc(48);
    for (int i = 0; i < 48; ++i)
        sc[i] = 6 * i;
    SnapshotConfig cfg;
    cfg.n_snapshots = snapshots;
    cfg.snr_db = snr_db;
    return array_snapshots(link, 0.0, arr, sc, num, std::nullopt, cfg, seed);
}

double angle_between(const Angles &a, const Angles &b)
{
    return rad2deg(std::acos(std::clamp(a.unit_vector().dot(b.unit_vector()), -1.0, 1.0)));
}

AntennaArray square(int n)
{
    AntennaArray a;
    a.rows = n;
    a.cols = n;
    return a;
}

} // namespace

TEST_CASE("AoA of a clean plane wave", "[measurements]")
{
    const auto arr = square(8);
    const Angles est = estimate_aoa(plane_wave(arr, {30.0, 90.0}, std::nullopt, 1), arr);
    CHECK(std::abs(est.azimuth_deg - 30.0) < 0.5);
    CHECK(std::abs(est.zenith_deg - 90.0) < 0.5);

    for (int n : {2, 4, 8})
    {
        const auto a = square(n);
        const Angles b = estimate_aoa(plane_wave(a, {0.0, 90.0}, std::nullopt, 1), a);
        CHECK(std::abs(b.azimuth_deg) < 0.5);
        CHECK(std::abs(b.zenith_deg - 90.0) < 0.5);
    }
    AntennaArray down;
    down.rows = 4;
    down.cols = 4;
    down.boresight_zenith_deg = 180.0;
    const Angles nadir = estimate_aoa(plane_wave(down, {0.0, 180.0}, std::nullopt, 1), down);
    CHECK(nadir.zenith_deg > 179.5);
}

TEST_CASE("property: AoA recovers random clean directions", "[measurements][property]")
{
    oracle::Gen g(44);
    const auto arr = square(8);
    for (int t = 0; t < 100; ++t)
    {
        const Angles dir{g.uniform(-60.0, 60.0), g.uniform(60.0, 120.0)};
        const Angles est = estimate_aoa(plane_wave(arr, dir, std::nullopt, 1), arr);
        CHECK(angle_between(est, dir) < 0.5);
    }
}

TEST_CASE("AoA accuracy grows with the array", "[measurements]")
{
    const Angles dir{25.0, 100.0};
    auto rmse = [&](int n) {
        const auto arr = square(n);
        double s = 0.0;
        for (int t = 0; t < 1000; ++t)
        {
            const double e = angle_between(estimate_aoa(plane_wave(arr, dir, 10.0, 500 + t, 1), arr), dir);
            s += e * e;
        }
        return std::sqrt(s / 1000.0);
    };
    const double r2 = rmse(2), r8 = rmse(8);
    INFO("RMSE 2x2 " << r2 << " deg, 8x8 " << r8 << " deg");
    CHECK(r8 < r2);
}

TEST_CASE("AoA errors", "[measurements]")
{
    const auto arr = square(4);
    CHECK_THROWS_AS(estimate_aoa(Eigen::MatrixXcd::Zero(16, 4), arr), std::invalid_argument);
    CHECK_THROWS_AS(estimate_aoa(Eigen::MatrixXcd::Ones(15, 4), arr), std::invalid_argument);
    CHECK_THROWS_AS(estimate_aoa(Eigen::MatrixXcd::Ones(1, 4), square(1)), std::invalid_argument);
}

TEST_CASE("timing quantisation examples", "[measurements]")
{
    CHECK(quantize_timing(0.0, 2, FrequencyRange::fr1).value_tc == 0);
    const auto r = quantize_timing(10e-9, 2, FrequencyRange::fr1);
    CHECK(r.value_tc == 20);
    CHECK(dequantize_timing(r) == Approx(10.17e-9).margin(0.01e-9));
    const auto big = quantize_timing(600e-6, 2, FrequencyRange::fr1);
    CHECK(big.value_tc == 985024);
    CHECK(big.clamped);
    CHECK(big.seconds() == Approx(501e-6).margin(0.1e-6));
    CHECK(quantize_timing(-600e-6, 5, FrequencyRange::fr2).value_tc == -985024);
    CHECK_THROWS_AS(quantize_timing(1e-9, 1, FrequencyRange::fr1), std::invalid_argument);
    CHECK_THROWS_AS(quantize_timing(1e-9, 6, FrequencyRange::fr2), std::invalid_argument);
    CHECK_NOTHROW(quantize_timing(1e-9, 0, FrequencyRange::fr2));
    CHECK(timing_k_valid(2, FrequencyRange::fr1));
    CHECK_FALSE(timing_k_valid(0, FrequencyRange::fr1));
}

TEST_CASE("property: timing round trip and alignment", "[measurements][property]")
{
    oracle::Gen g(6);
    for (int t = 0; t < 20000; ++t)
    {
        const auto fr = g.coin() ? FrequencyRange::fr1 : FrequencyRange::fr2;
        const int k = g.integer(fr == FrequencyRange::fr1 ? 2 : 0, 5);
        const double limit = 985024 * oracle::tc;
        const double v = g.uniform(-limit, limit);
        const auto rep = quantize_timing(v, k, fr);
        CHECK_NOTHROW(rep.validate());
        CHECK(rep.value_tc == oracle::quantize_tc(v, k));
        CHECK(std::abs(dequantize_timing(rep) - v) <= std::ldexp(oracle::tc, k - 1) * (1 + 1e-9));
        // fuzz far outside the range
        const auto wide = quantize_timing(g.uniform(-1e-2, 1e-2), k, fr);
        CHECK_NOTHROW(wide.validate());
    }
    TimingReport bad;
    bad.value_tc = 6;
    bad.k = 2;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.value_tc = 985028;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("power quantisation", "[measurements]")
{
    CHECK(quantize_power(-100.4).value_dbm == -100);
    CHECK(quantize_power(-200.0).value_dbm == -156);
    CHECK(quantize_power(-200.0).clamped);
    CHECK(quantize_power(-30.0).value_dbm == -31);
    CHECK(quantize_power(-31.0).value_dbm == -31);
    CHECK_FALSE(quantize_power(-31.0).clamped);
    oracle::Gen g(9);
    for (int t = 0; t < 1000; ++t)
    {
        const int v = quantize_power(g.uniform(-300.0, 50.0)).value_dbm;
        CHECK(v >= -156);
        CHECK(v <= -31);
    }
}

TEST_CASE("sample aggregation", "[measurements]")
{
    const std::vector<double> one{3e-9};
    CHECK(aggregate_samples(one) == 3e-9);
    const std::vector<double> four{1e-9, 2e-9, 3e-9, 4e-9};
    CHECK(aggregate_samples(four) == Approx(2.5e-9));
    const std::vector<double> five{1, 2, 3, 4, 5};
    CHECK_THROWS_AS(aggregate_samples(five), std::invalid_argument);
    CHECK_THROWS_AS(aggregate_samples(std::vector<double>{}), std::invalid_argument);
}
