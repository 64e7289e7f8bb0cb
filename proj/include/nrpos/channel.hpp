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
#include "nrpos/scenario.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace nrpos
{

// Distance-dependent LOS probability in the 3GPP family of curves.
//   urban:  1 for d <= d1, else d1/d + exp(-d/decay1) (1 - d1/d)
//   office: 1 for d <= d1, exp(-(d - d1)/decay1) for d1 < d <= d2,
//           scale2 exp(-(d - d2)/decay2) beyond d2
struct LosProbabilityModel
{
    enum class Kind
    {
        urban,
        office,
    };
    Kind kind = Kind::urban;
    double d1 = 18.0;
    double decay1 = 63.0;
    double d2 = 0.0;
    double scale2 = 0.0;
    double decay2 = 1.0;

    double probability(double d2d) const;
};

// PL = intercept + distance_coeff log10(d3d / 1 m) + frequency_coeff log10(fc / 1 GHz)
struct PathLossCoefficients
{
    double intercept_db = 0.0;
    double distance_coeff = 20.0;
    double frequency_coeff = 20.0;

    double eval(double d3d_m, double carrier_hz) const
    {
        return intercept_db + distance_coeff * std::log10(d3d_m) + frequency_coeff * std::log10(carrier_hz / 1e9);
    }
};

struct ChannelParams
{
    LosProbabilityModel los;
    PathLossCoefficients path_loss_los;
    PathLossCoefficients path_loss_nlos;
    double shadow_sigma_los_db = 4.0;
    double shadow_sigma_nlos_db = 6.0;
    int n_taps = 6;
    double rms_delay_spread_los_s = 30e-9;
    double rms_delay_spread_nlos_s = 60e-9;
    double k_factor_db = 9.0;
    double nlos_excess_mean_s = 100e-9;
    double nlos_angle_sigma_deg = 10.0;
    double tap_angle_spread_deg = 15.0;
    double sector_hpbw_deg = 65.0;
    double sector_front_back_db = 30.0;
    // Ideal channel: LOS everywhere, one tap, no shadowing.
    bool ideal = false;

    void validate() const;
};

ChannelParams default_channel_params(ScenarioKind s);

struct Tap
{
    double delay_s = 0.0;
    cx gain{1.0, 0.0};
    Angles direction;  // as seen from the TRP, towards the UE side of the path
};

// One TRP-UE link. Taps are sorted by delay; the first tap sits at the
// geometric delay plus first_path_excess_s (zero for LOS).
struct LinkRealization
{
    bool los = true;
    double distance_m = 0.0;
    double path_loss_db = 0.0;
    double shadow_db = 0.0;
    std::vector<Tap> taps;
    double first_path_excess_s = 0.0;
    Angles aoa_true;  // geometric direction TRP -> UE (uplink arrival at the TRP)
    Angles aod_true;  // geometric direction TRP -> UE (downlink departure)

    double geometric_delay_s() const { return distance_m / speed_of_light; }
    double total_tap_power() const;
};

// tap_spacing_s is one sample of the simulated numerology.
LinkRealization realize_link(std::mt19937_64 &rng, const ChannelParams &params, const Trp &trp, const Vec3 &ue,
                             double carrier_hz, double tap_spacing_s);

struct NoiseModel
{
    double noise_figure_db = 9.0;
    double bandwidth_hz = 30e3;

    // -174 dBm/Hz + 10 log10(bandwidth) + NF. Throws for non-positive bandwidth.
    double thermal_dbm() const;
    double power_mw() const { return db_to_linear(thermal_dbm()); }

    static NoiseModel per_re(double noise_figure_db, const Numerology &num) { return {noise_figure_db, num.scs_hz()}; }
};

constexpr double ue_noise_figure_db = 9.0;
constexpr double trp_noise_figure_db = 5.0;

// tx + gains - path loss - shadow - thermal noise. Power and noise must refer
// to the same span (per RE, or both over the full band).
double snr_at_re(double tx_power_dbm, double gains_db, double path_loss_db, double shadow_db, const NoiseModel &noise);

// Parabolic horizontal pattern, 0 dB at boresight.
struct SectorPattern
{
    double boresight_azimuth_deg = 0.0;
    double hpbw_deg = 65.0;
    double front_back_db = 30.0;

    double gain_db(double azimuth_deg) const;
};

// Parabolic pencil beam in azimuth and zenith, 0 dB on its pointing direction.
struct BeamPattern
{
    Angles pointing;
    double hpbw_deg = 30.0;
    double zenith_hpbw_deg = 60.0;
    double max_attenuation_db = 30.0;

    double gain_db(const Angles &dir) const;
};

// Per-RE transmit power of a signal spread evenly over n_subcarriers.
inline double epre_dbm(double total_power_dbm, int n_subcarriers)
{
    return total_power_dbm - 10.0 * std::log10(static_cast<double>(n_subcarriers));
}

// One transmitter's signal as seen by a receiver.
struct Contribution
{
    const ResourceGrid *tx = nullptr;
    const LinkRealization *link = nullptr;
    double tx_power_dbm = 0.0;   // per RE
    double extra_gain_db = 0.0;  // array gains etc.
    std::optional<SectorPattern> sector;
    std::optional<BeamPattern> beam;
    double extra_delay_s = 0.0;  // clock offsets between transmitter and receiver window
};

// Received amplitude per grid subcarrier: link budget times the sum over taps
// of gain exp(-j 2 pi f tau).
std::vector<cx> frequency_response(const Contribution &c, const Numerology &num);

// Adds one contribution onto the occupied REs of its transmit grid.
void add_contribution(ResourceGrid &rx, const Contribution &c, const Numerology &num);

enum class NoiseFill
{
    all,       // every RE of the grid
    occupied,  // only REs carrying some contribution
};

// Adds complex white noise at the thermal floor. The sample at RE (k, l)
// depends only on (seed, k, l), so different fills agree where they overlap.
void add_noise(ResourceGrid &rx, const NoiseModel &noise, std::uint64_t seed, NoiseFill fill);

// Superposition of all contributions plus one noise draw. Colliding comb REs
// simply add, which is where interference appears.
ResourceGrid received_grid(std::span<const Contribution> contributions, const std::optional<NoiseModel> &noise,
                           const Numerology &num, std::uint64_t noise_seed, NoiseFill fill = NoiseFill::all);

// Steering vector exp(j 2 pi p_m . u) for direction u.
Eigen::VectorXcd steering_vector(const AntennaArray &array, const Vec3 &direction);

struct SnapshotConfig
{
    int n_snapshots = 8;
    // When set, noise per element and snapshot is scaled to give this SNR
    // relative to the mean received channel power.
    std::optional<double> snr_db;
};

// Matched-filter array snapshots (elements x snapshots) of an uplink
// reference signal occupying the given subcarriers. Snapshot l averages the
// de-spread REs of the l-th contiguous subband, so its noise variance is the
// per-RE variance divided by the subband size.
Eigen::MatrixXcd array_snapshots(const LinkRealization &link, double rx_power_dbm, const AntennaArray &array,
                                 std::span<const int> subcarriers, const Numerology &num,
                                 std::optional<double> noise_mw_per_re, const SnapshotConfig &cfg,
                                 std::uint64_t noise_seed);

} // namespace nrpos
