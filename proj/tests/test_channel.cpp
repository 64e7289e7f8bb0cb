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

LinkRealization single_tap(double distance_m, double path_loss_db = 0.0)
{
    LinkRealization l;
    l.distance_m = distance_m;
    l.path_loss_db = path_loss_db;
    l.taps.push_back({distance_m / speed_of_light, {1.0, 0.0}, {}});
    return l;
}

ResourceGrid prs_grid(const Numerology &num, int offset, int seq)
{
    DlPrsResource r;
    r.comb_size = 12;
    r.n_symbols = 12;
    r.re_offset = offset;
    r.seq_id = seq;
    r.n_prb = num.n_prb;
    ResourceGrid g = ResourceGrid::for_slot(num);
    map_dl_prs(g, r, 0);
    return g;
}

} // namespace

TEST_CASE("LOS probability curves", "[channel]")
{
    for (auto s : {ScenarioKind::uma, ScenarioKind::umi, ScenarioKind::ioo})
    {
        const auto p = default_channel_params(s);
        CHECK(p.los.probability(1e-6) == 1.0);
        double prev = 1.0;
        for (double d = 1.0; d < 1000.0; d *= 1.3)
        {
            const double v = p.los.probability(d);
            CHECK(v <= prev + 1e-12);
            CHECK(v >= 0.0);
            prev = v;
        }
    }
}

TEST_CASE("empirical LOS fraction follows the curve", "[channel]")
{
    const auto params = default_channel_params(ScenarioKind::ioo);
    Trp trp;
    trp.position = Vec3(0.0, 0.0, 3.0);
    const Vec3 ue(20.0, 0.0, 1.5);
    auto rng = substream(42, Stream::link, {0});
    int los = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i)
        los += realize_link(rng, params, trp, ue, 2e9, 1e-9).los;
    const double expect = std::exp(-(20.0 - 5.0) / 70.8);
    CHECK(std::abs(double(los) / n - expect) < 0.01);
}

TEST_CASE("link realization invariants", "[channel][property]")
{
    oracle::Gen g(12);
    for (auto s : {ScenarioKind::uma, ScenarioKind::umi, ScenarioKind::ioo})
    {
        const auto params = default_channel_params(s);
        for (int trial = 0; trial < 300; ++trial)
        {
            Trp trp;
            trp.position = Vec3(g.uniform(-100, 100), g.uniform(-100, 100), g.uniform(3, 30));
            const Vec3 ue(g.uniform(-200, 200), g.uniform(-200, 200), 1.5);
            auto rng = substream(trial, Stream::link, {static_cast<std::uint64_t>(s)});
            const auto link = realize_link(rng, params, trp, ue, 2e9, 1.0 / (4096 * 30e3));
            REQUIRE(link.taps.size() == static_cast<std::size_t>(params.n_taps));
            for (std::size_t t = 1; t < link.taps.size(); ++t)
                CHECK(link.taps[t].delay_s > link.taps[t - 1].delay_s);
            CHECK(link.taps[0].delay_s ==
                  Approx(link.geometric_delay_s() + link.first_path_excess_s).epsilon(1e-12));
            if (link.los)
            {
                CHECK(link.first_path_excess_s == 0.0);
                CHECK(link.taps[0].delay_s == (ue - trp.position).norm() / speed_of_light);
            }
            else
                CHECK(link.first_path_excess_s >= 0.0);
        }
    }
    Trp trp;
    auto rng = substream(1, Stream::link, {});
    CHECK_THROWS_AS(realize_link(rng, default_channel_params(ScenarioKind::ioo), trp, trp.position, 2e9, 1e-9),
                    std::invalid_argument);
}

TEST_CASE("realize_link is deterministic for a seed", "[channel]")
{
    Trp trp;
    trp.position = Vec3(0.0, 0.0, 25.0);
    const auto params = default_channel_params(ScenarioKind::uma);
    auto a = substream(5, Stream::link, {1, 2});
    auto b = substream(5, Stream::link, {1, 2});
    const auto la = realize_link(a, params, trp, Vec3(300, 40, 1.5), 2e9, 1e-9);
    const auto lb = realize_link(b, params, trp, Vec3(300, 40, 1.5), 2e9, 1e-9);
    REQUIRE(la.taps.size() == lb.taps.size());
    for (std::size_t i = 0; i < la.taps.size(); ++i)
        CHECK(la.taps[i].gain == lb.taps[i].gain);
    CHECK(la.shadow_db == lb.shadow_db);
}

TEST_CASE("noise model and link budget", "[channel]")
{
    CHECK(NoiseModel{9.0, 30e3}.thermal_dbm() == Approx(-174.0 + 10.0 * std::log10(30e3) + 9.0));
    CHECK_THROWS_AS(NoiseModel({9.0, 0.0}).thermal_dbm(), std::invalid_argument);
    const NoiseModel n{9.0, 30e3};
    CHECK(snr_at_re(20, 0, 110, 0, n) - snr_at_re(20, 0, 100, 0, n) == Approx(-10.0));

    const Deployment dep = make_deployment(ScenarioKind::ioo, FrequencyRange::fr1);
    const auto p = default_channel_params(ScenarioKind::ioo);
    const double d3 = std::hypot(20.0, 1.5);
    const double pl = p.path_loss_los.eval(d3, dep.carrier_hz);
    const double snr = snr_at_re(epre_dbm(23.0, 3264), 0.0, pl, 0.0, NoiseModel::per_re(ue_noise_figure_db, dep.numerology));
    CHECK(snr > 0.0);
    CHECK(snr == Approx(47.1418).margin(1e-3));
}

TEST_CASE("single tap response is a phase ramp", "[channel]")
{
    const Numerology num = Numerology::make(30, 24);
    const auto link = single_tap(30.0);
    Contribution c;
    c.link = &link;
    const auto h = frequency_response(c, num);
    const double tau = 30.0 / speed_of_light;
    for (int k = 0; k < num.subcarriers(); ++k)
    {
        const cx expect = std::polar(1.0, -2.0 * oracle::pi * num.subcarrier_frequency_hz(k) * tau);
        CHECK(std::abs(h[k] - expect) < 1e-9);
    }
}

TEST_CASE("power scaling and disjoint combs", "[channel]")
{
    const Numerology num = Numerology::make(30, 24);
    const ResourceGrid a = prs_grid(num, 0, 1), b = prs_grid(num, 1, 2);
    const auto la = single_tap(20.0, 60.0), lb = single_tap(35.0, 65.0);
    Contribution ca{&a, &la, 0.0}, cb{&b, &lb, 0.0};
    const std::vector<Contribution> both{ca, cb};
    const ResourceGrid rx = received_grid(both, std::nullopt, num, 0);
    const ResourceGrid only_a = received_grid(std::span(&ca, 1), std::nullopt, num, 0);
    for (int l = 0; l < rx.symbols(); ++l)
        for (int k = 0; k < rx.subcarriers(); ++k)
            if (a.occupied(k, l))
                CHECK(rx.at(k, l) == only_a.at(k, l));

    Contribution doubled = ca;
    doubled.tx_power_dbm = 10.0 * std::log10(2.0);
    const ResourceGrid rx2 = received_grid(std::span(&doubled, 1), std::nullopt, num, 0);
    CHECK(rx2.energy() / only_a.energy() == Approx(2.0).epsilon(1e-12));

    const ResourceGrid wrong(12, 14);
    Contribution bad{&wrong, &la, 0.0};
    CHECK_THROWS_AS(received_grid(std::span(&bad, 1), std::nullopt, num, 0), std::invalid_argument);
}

TEST_CASE("superposition with one noise draw", "[channel][property]")
{
    const Numerology num = Numerology::make(30, 24);
    oracle::Gen g(31);
    for (int trial = 0; trial < 20; ++trial)
    {
        std::vector<ResourceGrid> tx;
        std::vector<LinkRealization> links;
        for (int j = 0; j < 3; ++j)
        {
            tx.push_back(prs_grid(num, g.integer(0, 11), j));
            links.push_back(single_tap(g.uniform(5, 80), g.uniform(50, 70)));
        }
        std::vector<Contribution> cs;
        for (int j = 0; j < 3; ++j)
            cs.push_back({&tx[j], &links[j], g.uniform(-10, 10)});
        const NoiseModel noise{9.0, num.scs_hz()};
        const std::uint64_t seed = trial;
        const ResourceGrid rx = received_grid(cs, noise, num, seed);
        ResourceGrid manual(num.subcarriers(), symbols_per_slot);
        for (const auto &c : cs)
        {
            const auto h = frequency_response(c, num);
            for (int l = 0; l < symbols_per_slot; ++l)
                for (int k = 0; k < num.subcarriers(); ++k)
                    if (c.tx->occupied(k, l))
                        manual.at(k, l) += h[k] * c.tx->at(k, l);
        }
        const double sigma = std::sqrt(noise.power_mw());
        for (int l = 0; l < symbols_per_slot; ++l)
            for (int k = 0; k < num.subcarriers(); ++k)
            {
                const cx expect = manual.at(k, l) + sigma * counter_gaussian(seed, manual.index(k, l));
                CHECK(std::abs(rx.at(k, l) - expect) < 1e-9 * std::max(1.0, std::abs(expect)) + 1e-20);
            }
    }
}

TEST_CASE("noise energy matches the thermal floor", "[channel]")
{
    ResourceGrid g(100000, 10);
    const NoiseModel noise{9.0, 30e3};
    add_noise(g, noise, 77, NoiseFill::all);
    const double mean_mw = g.energy() / 1e6;
    CHECK(std::abs(linear_to_db(mean_mw) - noise.thermal_dbm()) < 0.1);

    ResourceGrid sparse(48, 14);
    sparse.put(3, 3, {0.0, 0.0});
    add_noise(sparse, noise, 1, NoiseFill::occupied);
    CHECK(sparse.at(3, 3) != cx{});
    CHECK(sparse.at(4, 3) == cx{});
}

TEST_CASE("distinct combs give identical TOA with or without other TRPs", "[channel]")
{
    const Deployment dep = make_deployment(ScenarioKind::ioo, FrequencyRange::fr1);
    const Numerology &num = dep.numerology;
    const auto params = default_channel_params(ScenarioKind::ioo);
    const Vec3 ue(42.0, 21.0, 1.5);
    std::vector<ResourceGrid> tx;
    std::vector<LinkRealization> links;
    for (int j = 0; j < 12; ++j)
    {
        tx.push_back(prs_grid(num, j, j));
        auto rng = substream(3, Stream::link, {0, static_cast<std::uint64_t>(j)});
        links.push_back(realize_link(rng, params, dep.trps[j], ue, dep.carrier_hz, num.sample_period_s()));
    }
    std::vector<Contribution> all;
    for (int j = 0; j < 12; ++j)
        all.push_back({&tx[j], &links[j], epre_dbm(23.0, num.subcarriers())});
    const auto noise = NoiseModel::per_re(ue_noise_figure_db, num);
    const ResourceGrid shared = received_grid(all, noise, num, 99, NoiseFill::occupied);
    for (int j = 0; j < 12; ++j)
    {
        const ResourceGrid alone = received_grid(std::span(&all[j], 1), noise, num, 99, NoiseFill::occupied);
        const auto ref = ReferenceSignal::from_grid(tx[j]);
        const auto a = estimate_toa(shared, ref, num), b = estimate_toa(alone, ref, num);
        REQUIRE(a.has_value() == b.has_value());
        if (a)
            CHECK(a->toa_s == b->toa_s);
    }
}

TEST_CASE("antenna patterns", "[channel]")
{
    SectorPattern s{0.0, 65.0, 30.0};
    CHECK(s.gain_db(0.0) == 0.0);
    CHECK(s.gain_db(32.5) == Approx(-3.0));
    CHECK(s.gain_db(180.0) == -30.0);
    BeamPattern b;
    b.pointing = {30.0, 90.0};
    CHECK(b.gain_db({30.0, 90.0}) == 0.0);
    CHECK(b.gain_db({30.0 + 15.0, 90.0}) == Approx(-3.0));
    CHECK(b.gain_db({-150.0, 90.0}) == -30.0);
}

TEST_CASE("array snapshots of a plane wave", "[channel]")
{
    AntennaArray arr;
    arr.rows = 4;
    arr.cols = 4;
    const Numerology num = Numerology::make(30, 24);
    LinkRealization link = single_tap(50.0);
    link.taps[0].direction = {20.0, 100.0};
    std::vector<int> sc(64);
    for (int i = 0; i < 64; ++i)
        sc[i] = 4 * i;
    const auto x = array_snapshots(link, 0.0, arr, sc, num, std::nullopt, {}, 1);
    REQUIRE(x.rows() == 16);
    REQUIRE(x.cols() == 8);
    const Eigen::VectorXcd a = steering_vector(arr, link.taps[0].direction.unit_vector());
    for (int l = 0; l < 8; ++l)
    {
        // each snapshot is a scalar times the steering vector
        const cx s = a.dot(x.col(l)) / 16.0;
        CHECK((x.col(l) - s * a).norm() < 1e-9);
    }
    SnapshotConfig cfg;
    cfg.n_snapshots = 100;
    CHECK_THROWS_AS(array_snapshots(link, 0.0, arr, sc, num, std::nullopt, cfg, 1), std::invalid_argument);
}
