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
#include "nrpos/records.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nrpos
{

enum class Method
{
    dl_tdoa,
    ul_tdoa,
    multi_rtt,
    ul_aoa,
    dl_aod,
};

std::string to_string(Method m);
Method method_from_string(const std::string &s);

enum class NlosRejection
{
    off,
    residual_trim,  // drop the worst measurement while it exceeds 3x the median residual, at most twice
};

struct Box
{
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();
    bool contains(const Vec3 &p) const
    {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
};

struct SolverOptions
{
    int max_iterations = 50;
    double tolerance_m = 1e-4;
    std::optional<double> fix_height = 1.5;  // empty: full 3D
    NlosRejection nlos_rejection = NlosRejection::off;
    bool multi_start = true;                 // also start next to every anchor
    std::optional<Vec3> initial_guess;
    // Deployment area: bounds the horizontal search (plus a 10% margin) and
    // breaks the mirror ambiguity of 3D trilateration.
    std::optional<Box> area;

    void validate() const;
};

struct PositionFix
{
    Vec3 position = Vec3::Zero();
    double residual_rms = 0.0;
    int iterations = 0;
    bool converged = false;
    Method method = Method::dl_tdoa;
    std::vector<std::size_t> rejected;   // indices of trimmed measurements
    std::vector<double> cost_history;    // residual RMS after every accepted step
};

using AnchorMap = std::map<int, Vec3>;

struct RstdMeasurement
{
    int trp = 0;
    int reference = 0;
    double meters = 0.0;  // c * (toa_trp - toa_reference)
};

struct RangeMeasurement
{
    int trp = 0;
    double meters = 0.0;
};

struct AngleMeasurement
{
    int trp = 0;
    double azimuth_deg = 0.0;
    std::optional<double> zenith_deg;
    double weight = 1.0;
};

struct BeamRsrp
{
    int resource_id = 0;
    Angles direction;
    double rsrp_dbm = 0.0;
};

struct TrpBeams
{
    int trp = 0;
    std::vector<BeamRsrp> beams;
};

struct AodEstimate
{
    int trp = 0;
    Angles direction;
    bool has_zenith = false;
    bool low_confidence = false;
    double weight = 1.0;
};

// RSRP-weighted circular mean of the strongest three beams. Flat RSRP
// (< 1 dB spread) or a single beam gives a low-confidence, down-weighted
// estimate.
AodEstimate estimate_aod(const TrpBeams &beams);

PositionFix tdoa_solve(const AnchorMap &anchors, std::span<const RstdMeasurement> rstd, const SolverOptions &opt = {});
PositionFix rtt_solve(const AnchorMap &anchors, std::span<const RangeMeasurement> ranges, const SolverOptions &opt = {});
PositionFix aoa_solve(const AnchorMap &anchors, std::span<const AngleMeasurement> angles, const SolverOptions &opt = {});
PositionFix aod_solve(const AnchorMap &anchors, std::span<const TrpBeams> beams, const SolverOptions &opt = {});

// Residual RMS of a candidate position; the cost the solvers minimise.
double tdoa_residual_rms(const AnchorMap &anchors, std::span<const RstdMeasurement> rstd, const Vec3 &x);
double rtt_residual_rms(const AnchorMap &anchors, std::span<const RangeMeasurement> ranges, const Vec3 &x);
// Radians. The 2D angle solvers fit azimuth only; pass use_zenith = false to
// evaluate the same objective.
double aoa_residual_rms(const AnchorMap &anchors, std::span<const AngleMeasurement> angles, const Vec3 &x,
                        bool use_zenith = true);

// sqrt(trace((J^T J)^-1)) of the method's measurement Jacobian; TDOA uses
// the first anchor as reference. Singular geometry gives +infinity.
double gdop(std::span<const Vec3> anchors, const Vec3 &position, Method method, bool two_d = true);

// RSRP-weighted anchor centroid (plain centroid without weights). Height
// from fix_height, else mean anchor height minus 1.5 m.
Vec3 init_guess(std::span<const Vec3> anchors, std::span<const double> rsrp_dbm = {},
                std::optional<double> fix_height = std::nullopt);

enum class RecordPayload
{
    quantized,  // reported values, as a location server would see them
    raw,        // unquantised estimates kept alongside
};

// Offline solve from reported measurements of one UE.
PositionFix solve_records(Method method, const AnchorMap &anchors, std::span<const MeasurementRecord> records,
                          const SolverOptions &opt = {}, RecordPayload payload = RecordPayload::quantized);

} // namespace nrpos
