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
#include "nrpos/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace nrpos
{

double LosProbabilityModel::probability(double d2d) const
{
    if (d2d <= d1)
        return 1.0;
    switch (kind)
    {
    case Kind::urban:
        return d1 / d2d + std::exp(-d2d / decay1) * (1.0 - d1 / d2d);
    case Kind::office:
        if (d2d <= d2)
            return std::exp(-(d2d - d1) / decay1);
        return scale2 * std::exp(-(d2d - d2) / decay2);
    }
    return 1.0;
}

void ChannelParams::validate() const
{
    if (n_taps < 1)
        throw std::invalid_argument("ChannelParams: n_taps must be at least 1");
    if (shadow_sigma_los_db < 0.0 || shadow_sigma_nlos_db < 0.0)
        throw std::invalid_argument("ChannelParams: shadow sigma must be non-negative");
    if (rms_delay_spread_los_s <= 0.0 || rms_delay_spread_nlos_s <= 0.0)
        throw std::invalid_argument("ChannelParams: delay spread must be positive");
    if (nlos_excess_mean_s < 0.0)
        throw std::invalid_argument("ChannelParams: NLOS excess delay mean must be non-negative");
    if (nlos_angle_sigma_deg < 0.0 || tap_angle_spread_deg < 0.0)
        throw std::invalid_argument("ChannelParams: angle spreads must be non-negative");
    if (sector_hpbw_deg <= 0.0 || sector_front_back_db < 0.0)
        throw std::invalid_argument("ChannelParams: invalid sector pattern");
}

ChannelParams default_channel_params(ScenarioKind s)
{
    ChannelParams p;
    switch (s)
    {
    case ScenarioKind::uma:
        p.los = {LosProbabilityModel::Kind::urban, 18.0, 63.0};
        p.path_loss_los = {28.0, 22.0, 20.0};
        p.path_loss_nlos = {13.54, 39.08, 20.0};
        p.shadow_sigma_los_db = 4.0;
        p.shadow_sigma_nlos_db = 6.0;
        p.rms_delay_spread_los_s = 60e-9;
        p.rms_delay_spread_nlos_s = 100e-9;
        p.k_factor_db = 9.0;
        p.nlos_excess_mean_s = 100e-9;
        p.nlos_angle_sigma_deg = 10.0;
        p.tap_angle_spread_deg = 10.0;
        break;
    case ScenarioKind::umi:
        p.los = {LosProbabilityModel::Kind::urban, 18.0, 36.0};
        p.path_loss_los = {32.4, 21.0, 20.0};
        p.path_loss_nlos = {22.4, 35.3, 21.3};
        p.shadow_sigma_los_db = 4.0;
        p.shadow_sigma_nlos_db = 7.82;
        p.rms_delay_spread_los_s = 40e-9;
        p.rms_delay_spread_nlos_s = 80e-9;
        p.k_factor_db = 9.0;
        p.nlos_excess_mean_s = 100e-9;
        p.nlos_angle_sigma_deg = 10.0;
        p.tap_angle_spread_deg = 15.0;
        break;
    case ScenarioKind::ioo:
        p.los = {LosProbabilityModel::Kind::office, 5.0, 70.8, 49.0, 0.54, 211.7};
        p.path_loss_los = {32.4, 17.3, 20.0};
        p.path_loss_nlos = {17.3, 38.3, 24.9};
        p.shadow_sigma_los_db = 3.0;
        p.shadow_sigma_nlos_db = 8.03;
        p.rms_delay_spread_los_s = 20e-9;
        p.rms_delay_spread_nlos_s = 40e-9;
        p.k_factor_db = 7.0;
        p.nlos_excess_mean_s = 30e-9;
        p.nlos_angle_sigma_deg = 10.0;
        p.tap_angle_spread_deg = 20.0;
        break;
    }
    return p;
}

double LinkRealization::total_tap_power() const
{
    double s = 0.0;
    for (const Tap &t : taps)
        s += std::norm(t.gain);
    return s;
}

namespace
{

Angles perturb(const Angles &a, double az_sigma, double zen_sigma, std::mt19937_64 &rng)
{
    std::normal_distribution<double> n01;
    Angles out;
    out.azimuth_deg = wrap_deg(a.azimuth_deg + az_sigma * n01(rng));
    out.zenith_deg = std::clamp(a.zenith_deg + zen_sigma * n01(rng), 0.0, 180.0);
    return out;
}

} // namespace

LinkRealization realize_link(std::mt19937_64 &rng, const ChannelParams &params, const Trp &trp, const Vec3 &ue,
                             double carrier_hz, double tap_spacing_s)
{
    const Vec3 delta = ue - trp.position;
    const double d3 = delta.norm();
    if (!(d3 > 0.0))
        throw std::invalid_argument("realize_link: TRP and UE positions coincide");
    if (tap_spacing_s <= 0.0 || carrier_hz <= 0.0)
        throw std::invalid_argument("realize_link: carrier and tap spacing must be positive");
    const double d2 = delta.head<2>().norm();

    LinkRealization link;
    link.distance_m = d3;
    link.aoa_true = Angles::from_vector(delta);
    link.aod_true = link.aoa_true;

    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> n01;

    // Draws happen in a fixed order so that a flag change does not shift the
    // stream for later quantities of the same link.
    const double u_los = u01(rng);
    const double z_shadow = n01(rng);
    const double u_excess = u01(rng);

    const double pl_los = params.path_loss_los.eval(d3, carrier_hz);
    if (params.ideal)
    {
        link.los = true;
        link.path_loss_db = pl_los;
        link.shadow_db = 0.0;
        const double tau = d3 / speed_of_light;
        link.taps.push_back({tau, std::polar(1.0, -2.0 * pi * carrier_hz * tau), link.aoa_true});
        return link;
    }

    link.los = u_los < params.los.probability(d2);
    if (link.los)
    {
        link.path_loss_db = pl_los;
        link.shadow_db = params.shadow_sigma_los_db * z_shadow;
    }
    else
    {
        link.path_loss_db = std::max(pl_los, params.path_loss_nlos.eval(d3, carrier_hz));
        link.shadow_db = params.shadow_sigma_nlos_db * z_shadow;
        // Inverse-CDF exponential; u in [0, 1) keeps the log finite.
        link.first_path_excess_s = -params.nlos_excess_mean_s * std::log1p(-u_excess);
    }

    Angles first_dir = link.aoa_true;
    if (!link.los)
        first_dir = perturb(first_dir, params.nlos_angle_sigma_deg, params.nlos_angle_sigma_deg / 2.0, rng);

    const double ds = link.los ? params.rms_delay_spread_los_s : params.rms_delay_spread_nlos_s;
    const double tau0 = d3 / speed_of_light + link.first_path_excess_s;
    const double k_lin = link.los ? db_to_linear(params.k_factor_db) : 0.0;

    std::vector<double> pdp(static_cast<std::size_t>(params.n_taps));
    double pdp_sum = 0.0;
    for (int t = 0; t < params.n_taps; ++t)
    {
        pdp[t] = std::exp(-t * tap_spacing_s / ds);
        pdp_sum += pdp[t];
    }
    const double diffuse_scale = 1.0 / ((k_lin + 1.0) * pdp_sum);

    for (int t = 0; t < params.n_taps; ++t)
    {
        Tap tap;
        tap.delay_s = tau0 + t * tap_spacing_s;
        const double sigma = std::sqrt(pdp[t] * diffuse_scale / 2.0);
        tap.gain = cx(sigma * n01(rng), sigma * n01(rng));
        if (t == 0)
        {
            tap.direction = first_dir;
            if (link.los)
                tap.gain += std::polar(std::sqrt(k_lin / (k_lin + 1.0)), -2.0 * pi * carrier_hz * tap.delay_s);
        }
        else
        {
            tap.direction = perturb(first_dir, params.tap_angle_spread_deg, params.tap_angle_spread_deg / 3.0, rng);
        }
        link.taps.push_back(tap);
    }
    return link;
}

double NoiseModel::thermal_dbm() const
{
    if (!(bandwidth_hz > 0.0))
        throw std::invalid_argument("NoiseModel: bandwidth must be positive");
    return -174.0 + 10.0 * std::log10(bandwidth_hz) + noise_figure_db;
}

double snr_at_re(double tx_power_dbm, double gains_db, double path_loss_db, double shadow_db, const NoiseModel &noise)
{
    return tx_power_dbm + gains_db - path_loss_db - shadow_db - noise.thermal_dbm();
}

double SectorPattern::gain_db(double azimuth_deg) const
{
    const double x = wrap_deg(azimuth_deg - boresight_azimuth_deg) / hpbw_deg;
    return -std::min(12.0 * x * x, front_back_db);
}

double BeamPattern::gain_db(const Angles &dir) const
{
    const double a = wrap_deg(dir.azimuth_deg - pointing.azimuth_deg) / hpbw_deg;
    const double z = (dir.zenith_deg - pointing.zenith_deg) / zenith_hpbw_deg;
    return -std::min(12.0 * (a * a + z * z), max_attenuation_db);
}

std::vector<cx> frequency_response(const Contribution &c, const Numerology &num)
{
    if (c.link == nullptr)
        throw std::invalid_argument("frequency_response: contribution without link");
    const int n_sc = num.subcarriers();
    std::vector<cx> h(static_cast<std::size_t>(n_sc), cx{0.0, 0.0});
    const double budget_db = c.tx_power_dbm + c.extra_gain_db - c.link->path_loss_db - c.link->shadow_db;
    const double amp = std::sqrt(db_to_linear(budget_db));
    const double f0 = num.subcarrier_frequency_hz(0);
    const double df = num.scs_hz();
    constexpr int reanchor = 256;
    for (const Tap &tap : c.link->taps)
    {
        double g_db = 0.0;
        if (c.sector)
            g_db += c.sector->gain_db(tap.direction.azimuth_deg);
        if (c.beam)
            g_db += c.beam->gain_db(tap.direction);
        const cx g = amp * std::sqrt(db_to_linear(g_db)) * tap.gain;
        const double tau = tap.delay_s + c.extra_delay_s;
        const cx step = std::polar(1.0, -2.0 * pi * df * tau);
        cx rot;
        for (int k = 0; k < n_sc; ++k)
        {
            if (k % reanchor == 0)
                rot = std::polar(1.0, -2.0 * pi * (f0 + k * df) * tau);
            h[k] += g * rot;
            rot *= step;
        }
    }
    return h;
}

void add_contribution(ResourceGrid &rx, const Contribution &c, const Numerology &num)
{
    if (c.tx == nullptr)
        throw std::invalid_argument("add_contribution: contribution without grid");
    const ResourceGrid &tx = *c.tx;
    if (tx.subcarriers() != rx.subcarriers() || tx.symbols() != rx.symbols())
        throw std::invalid_argument("add_contribution: grid dimension mismatch");
    if (tx.subcarriers() != num.subcarriers())
        throw std::invalid_argument("add_contribution: grid does not match numerology");
    const std::vector<cx> h = frequency_response(c, num);
    const auto occ = tx.occupancy();
    const auto in = tx.cells();
    auto out = rx.cells();
    const int n_sc = tx.subcarriers();
    for (std::size_t i = 0; i < occ.size(); ++i)
    {
        if (!occ[i])
            continue;
        out[i] += h[i % n_sc] * in[i];
        const int k = static_cast<int>(i % n_sc);
        const int l = static_cast<int>(i / n_sc);
        rx.set_occupied(k, l);
    }
}

void add_noise(ResourceGrid &rx, const NoiseModel &noise, std::uint64_t seed, NoiseFill fill)
{
    const double sigma = std::sqrt(noise.power_mw());
    const auto occ = rx.occupancy();
    auto cells = rx.cells();
    for (std::size_t i = 0; i < cells.size(); ++i)
    {
        if (fill == NoiseFill::occupied && !occ[i])
            continue;
        cells[i] += sigma * counter_gaussian(seed, i);
    }
}

ResourceGrid received_grid(std::span<const Contribution> contributions, const std::optional<NoiseModel> &noise,
                           const Numerology &num, std::uint64_t noise_seed, NoiseFill fill)
{
    int symbols = symbols_per_slot;
    if (!contributions.empty())
    {
        if (contributions.front().tx == nullptr)
            throw std::invalid_argument("received_grid: contribution without grid");
        symbols = contributions.front().tx->symbols();
    }
    ResourceGrid rx(num.subcarriers(), symbols);
    for (const Contribution &c : contributions)
        add_contribution(rx, c, num);
    if (noise)
        add_noise(rx, *noise, noise_seed, fill);
    return rx;
}

Eigen::VectorXcd steering_vector(const AntennaArray &array, const Vec3 &direction)
{
    const std::vector<Vec3> pos = array.element_positions();
    Eigen::VectorXcd a(static_cast<Eigen::Index>(pos.size()));
    for (std::size_t m = 0; m < pos.size(); ++m)
        a(static_cast<Eigen::Index>(m)) = std::polar(1.0, 2.0 * pi * pos[m].dot(direction));
    return a;
}

Eigen::MatrixXcd array_snapshots(const LinkRealization &link, double rx_power_dbm, const AntennaArray &array,
                                 std::span<const int> subcarriers, const Numerology &num,
                                 std::optional<double> noise_mw_per_re, const SnapshotConfig &cfg,
                                 std::uint64_t noise_seed)
{
    if (cfg.n_snapshots < 1)
        throw std::invalid_argument("array_snapshots: need at least one snapshot");
    if (static_cast<int>(subcarriers.size()) < cfg.n_snapshots)
        throw std::invalid_argument("array_snapshots: fewer subcarriers than snapshots");
    std::vector<int> sc(subcarriers.begin(), subcarriers.end());
    std::sort(sc.begin(), sc.end());

    const int n_el = array.size();
    const int n_snap = cfg.n_snapshots;
    const std::size_t n = sc.size();
    std::vector<std::size_t> bounds(static_cast<std::size_t>(n_snap) + 1);
    for (int l = 0; l <= n_snap; ++l)
        bounds[l] = n * static_cast<std::size_t>(l) / static_cast<std::size_t>(n_snap);

    const double amp = std::sqrt(db_to_linear(rx_power_dbm));
    Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(n_el, n_snap);
    for (const Tap &tap : link.taps)
    {
        const Eigen::VectorXcd a = steering_vector(array, tap.direction.unit_vector());
        for (int l = 0; l < n_snap; ++l)
        {
            cx acc{0.0, 0.0};
            for (std::size_t i = bounds[l]; i < bounds[l + 1]; ++i)
                acc += std::polar(1.0, -2.0 * pi * num.subcarrier_frequency_hz(sc[i]) * tap.delay_s);
            acc /= static_cast<double>(bounds[l + 1] - bounds[l]);
            x.col(l) += (amp * tap.gain * acc) * a;
        }
    }

    double signal_power = amp * amp * link.total_tap_power();
    for (int l = 0; l < n_snap; ++l)
    {
        double var = 0.0;
        if (cfg.snr_db)
            var = signal_power / db_to_linear(*cfg.snr_db);
        else if (noise_mw_per_re)
            var = *noise_mw_per_re / static_cast<double>(bounds[l + 1] - bounds[l]);
        if (var <= 0.0)
            continue;
        const double sigma = std::sqrt(var);
        for (int m = 0; m < n_el; ++m)
            x(m, l) += sigma * counter_gaussian(noise_seed, static_cast<std::uint64_t>(m) * n_snap + l);
    }
    return x;
}

} // namespace nrpos
