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
#include <span>
#include <vector>

namespace nrpos
{

// Known transmitted REs of one reference resource.
struct ReferenceSignal
{
    struct Re
    {
        int k = 0;
        int l = 0;
        cx value;
    };
    std::vector<Re> res;

    // All occupied REs of a transmit grid.
    static ReferenceSignal from_grid(const ResourceGrid &tx);
    // Sorted, de-duplicated subcarriers the reference touches.
    std::vector<int> subcarriers() const;
};

struct ToaOptions
{
    int oversampling = 8;
    double threshold_db = 13.0;  // first path within this of the strongest peak
    double noise_sigmas = 6.0;   // and above this many noise standard deviations
    bool hann_window = true;
    bool refine = true;  // Newton polish of the first-path peak off the FFT grid
    // Search window in seconds. Delays are circular with period 1 / scs;
    // the window may start negative.
    double window_min_s = 0.0;
    std::optional<double> window_max_s;  // default: window_min_s + half a period
};

struct ToaEstimate
{
    double toa_s = 0.0;
    double peak_power = 0.0;        // strongest delay-domain bin in the window
    double first_path_power = 0.0;
    double noise_power = 0.0;
    double snr_db = 0.0;            // peak over noise
};

// Matched filter over the reference REs, oversampled delay profile, earliest
// significant peak, parabolic refinement. Empty result when nothing rises
// above the noise threshold.
std::optional<ToaEstimate> estimate_toa(const ResourceGrid &rx, const ReferenceSignal &ref, const Numerology &num,
                                        const ToaOptions &opt = {});

inline double rstd(double toa_target_s, double toa_reference_s) { return toa_target_s - toa_reference_s; }
std::optional<double> rstd(const std::optional<ToaEstimate> &target, const std::optional<ToaEstimate> &reference);

inline double rx_tx_difference(double rx_time_s, double tx_time_s) { return rx_time_s - tx_time_s; }

struct RttValue
{
    double seconds = 0.0;
    bool clamped = false;
};

// ue_rxtx + gnb_rxtx, clamped at zero.
RttValue rtt(double ue_rxtx_s, double gnb_rxtx_s);

// Mean received power per reference RE in dBm. Throws on an empty RE set.
double rsrp_dbm(const ResourceGrid &rx, const ReferenceSignal &ref);

struct AoaOptions
{
    double coarse_step_u = 0.05;  // direction-cosine step of the first pass
    double fine_step_deg = 1.0;
    int fine_half_width = 3;      // fine grid points on each side
};

// Conventional beamformer over the visible half-space of the array. The
// snapshot matrix is elements x snapshots with element index r * cols + c.
// Axes the array cannot resolve (a single row or column) fall back to the
// boresight for that axis.
Angles estimate_aoa(const Eigen::MatrixXcd &snapshots, const AntennaArray &array, const AoaOptions &opt = {});

// Beamformer output power for one direction, normalised by elements and snapshots.
double beamformer_power(const Eigen::MatrixXcd &snapshots, const AntennaArray &array, const Vec3 &direction);

// ---- Reporting quantisation ----------------------------------------------

constexpr std::int64_t timing_report_limit_tc = 985024;
constexpr int power_report_min_dbm = -156;
constexpr int power_report_max_dbm = -31;
constexpr std::size_t max_measurement_samples = 4;

// Legal resolution exponents: FR1 2..5, FR2 0..5.
bool timing_k_valid(int k, FrequencyRange fr);

struct TimingReport
{
    std::int64_t value_tc = 0;
    int k = 2;
    FrequencyRange fr = FrequencyRange::fr1;
    bool clamped = false;

    double seconds() const { return static_cast<double>(value_tc) * tc_seconds; }
    // Throws when out of range, not step-aligned, or k illegal for fr.
    void validate() const;
};

// value = clamp(round(t / (2^k Tc)) 2^k, +-985024). Throws for illegal k.
TimingReport quantize_timing(double t_s, int k, FrequencyRange fr);
inline double dequantize_timing(const TimingReport &r) { return r.seconds(); }

struct PowerReport
{
    int value_dbm = 0;
    bool clamped = false;
};

PowerReport quantize_power(double p_dbm);

// Mean of 1..4 measurement samples.
double aggregate_samples(std::span<const double> samples);

} // namespace nrpos
