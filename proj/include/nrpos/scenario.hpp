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

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nrpos
{

enum class ScenarioKind
{
    uma,
    umi,
    ioo,
};

enum class FrequencyRange
{
    fr1,
    fr2,
};

std::string to_string(ScenarioKind s);
ScenarioKind scenario_from_string(const std::string &s);
std::string to_string(FrequencyRange fr);
FrequencyRange frequency_range_from_string(const std::string &s);

// Uniform rectangular array. Columns run along the horizontal panel axis,
// rows along the axis orthogonal to it and to the boresight.
struct AntennaArray
{
    int rows = 1;
    int cols = 1;
    double spacing_wavelengths = 0.5;
    double boresight_azimuth_deg = 0.0;
    double boresight_zenith_deg = 90.0;

    int size() const { return rows * cols; }
    Vec3 boresight() const { return Angles{boresight_azimuth_deg, boresight_zenith_deg}.unit_vector(); }
    // Unit vectors along the columns (horizontal) and rows of the panel.
    std::pair<Vec3, Vec3> panel_axes() const;
    // Element positions in wavelengths, centred on the array phase centre.
    // Element (r, c) has index r * cols + c.
    std::vector<Vec3> element_positions() const;
    void validate() const;
    bool operator==(const AntennaArray &) const = default;
};

struct Trp
{
    int trp_id = 0;
    int site_id = 0;
    Vec3 position = Vec3::Zero();
    bool sectorized = false;
    double sector_azimuth_deg = 0.0;
    double tx_power_dbm = 23.0;
    AntennaArray array;
    int comb_offset = 0;
};

struct Rect
{
    double x0 = 0.0;
    double y0 = 0.0;
    double width = 0.0;
    double height = 0.0;

    bool contains(const Vec2 &p) const
    {
        return p.x() >= x0 && p.x() <= x0 + width && p.y() >= y0 && p.y() <= y0 + height;
    }
    Vec2 center() const { return {x0 + width / 2.0, y0 + height / 2.0}; }
};

enum class DropRegion
{
    area,          // uniform in the whole rectangle
    hex_coverage,  // uniform in the union of site hexagons (clipped to the area)
};

struct Deployment
{
    ScenarioKind scenario = ScenarioKind::ioo;
    FrequencyRange fr = FrequencyRange::fr1;
    std::vector<Trp> trps;
    std::vector<Vec2> site_centers;
    Rect area;
    double isd = 20.0;
    double carrier_hz = 2e9;
    Numerology numerology;
    double ue_height = 1.5;
    double min_ue_distance = 0.0;  // 2D, to any site
    DropRegion drop_region = DropRegion::area;

    void validate() const;
};

// Scenario constants used by the constructors.
struct ScenarioDefaults
{
    double isd;
    int n_trps;
    double area_side_x;
    double area_side_y;
    double tx_power_dbm;
    double trp_height_min;
    double trp_height_max;
    double min_ue_distance;
};
ScenarioDefaults scenario_defaults(ScenarioKind s);

// 7 sites (centre plus a ring at distance isd) with sectors_per_site
// co-located TRPs at azimuths 0, 360/n, ... Sites are centred on center.
std::vector<Trp> hex_layout(double isd, int sectors_per_site = 3, Vec2 center = Vec2::Zero());

// 12 ceiling TRPs on a 6 x 2 grid (x in 10..110 step 20, y in {15, 35}, 3 m)
// of the 120 m x 50 m hall.
std::vector<Trp> ioo_layout();

struct DeploymentOptions
{
    std::uint64_t seed = 1;       // drives the UMa per-site heights
    Vec2 origin = Vec2::Zero();   // lower-left corner of the area
    int scs_khz = 0;              // 0: 30 kHz in FR1, 120 kHz in FR2
    int n_prb = 272;
    std::optional<double> tx_power_dbm;
    AntennaArray array;           // boresight is overridden per TRP
    std::optional<DropRegion> drop_region;
};

Deployment make_deployment(ScenarioKind s, FrequencyRange fr, const DeploymentOptions &opt = {});

// Uniform drops at UE height; deterministic for a given seed.
std::vector<Vec3> drop_ues(int n, const Deployment &dep, std::uint64_t seed);

// True when p lies inside the union of the deployment's site hexagons.
bool in_hex_coverage(const Deployment &dep, const Vec2 &p);

// Counter-clockwise hull by monotone chain. Throws std::invalid_argument on
// fewer than three points or collinear input.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

// Interior and boundary count as inside.
bool point_in_hull(const Vec2 &p, const std::vector<Vec2> &hull, double eps = 1e-9);

std::vector<Vec2> trp_xy(const Deployment &dep);

// offset(trp) = trp_id mod comb_size; also writes it into the TRPs.
std::vector<int> assign_comb_offsets(Deployment &dep, int comb_size);

} // namespace nrpos
