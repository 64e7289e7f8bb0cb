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

#include "nrpos/scenario.hpp"
#include "nrpos/rng.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace nrpos
{

std::string to_string(ScenarioKind s)
{
    switch (s)
    {
    case ScenarioKind::uma: return "uma";
    case ScenarioKind::umi: return "umi";
    case ScenarioKind::ioo: return "ioo";
    }
    return "?";
}

ScenarioKind scenario_from_string(const std::string &s)
{
    if (s == "uma")
        return ScenarioKind::uma;
    if (s == "umi")
        return ScenarioKind::umi;
    if (s == "ioo")
        return ScenarioKind::ioo;
    throw std::invalid_argument("unknown scenario '" + s + "' (expected uma, umi or ioo)");
}

std::string to_string(FrequencyRange fr) { return fr == FrequencyRange::fr1 ? "FR1" : "FR2"; }

FrequencyRange frequency_range_from_string(const std::string &s)
{
    if (s == "FR1" || s == "fr1")
        return FrequencyRange::fr1;
    if (s == "FR2" || s == "fr2")
        return FrequencyRange::fr2;
    throw std::invalid_argument("unknown frequency range '" + s + "'");
}

std::pair<Vec3, Vec3> AntennaArray::panel_axes() const
{
    const Vec3 b = boresight();
    // Horizontal panel axis, then the second axis completing the panel plane.
    const double az = deg2rad(boresight_azimuth_deg);
    Vec3 h(-std::sin(az), std::cos(az), 0.0);
    Vec3 v = b.cross(h);
    if (v.norm() < 1e-12)
        v = Vec3::UnitZ();
    v.normalize();
    return {h, v};
}

std::vector<Vec3> AntennaArray::element_positions() const
{
    const auto [h, v] = panel_axes();
    std::vector<Vec3> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            out.push_back(spacing_wavelengths * ((c - (cols - 1) / 2.0) * h + (r - (rows - 1) / 2.0) * v));
    return out;
}

void AntennaArray::validate() const
{
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("AntennaArray: rows and cols must be at least 1");
    if (spacing_wavelengths <= 0.0)
        throw std::invalid_argument("AntennaArray: element spacing must be positive");
}

ScenarioDefaults scenario_defaults(ScenarioKind s)
{
    switch (s)
    {
    case ScenarioKind::uma: return {500.0, 21, 1600.0, 1600.0, 49.0, 20.0, 50.0, 35.0};
    case ScenarioKind::umi: return {200.0, 21, 500.0, 500.0, 42.0, 10.0, 10.0, 10.0};
    case ScenarioKind::ioo: return {20.0, 12, 120.0, 50.0, 23.0, 3.0, 3.0, 0.0};
    }
    throw std::invalid_argument("scenario_defaults: unknown scenario");
}

std::vector<Trp> hex_layout(double isd, int sectors_per_site, Vec2 center)
{
    if (isd <= 0.0)
        throw std::invalid_argument("hex_layout: ISD must be positive");
    if (sectors_per_site < 1)
        throw std::invalid_argument("hex_layout: at least one sector per site");
    std::vector<Vec2> sites{center};
    for (int i = 0; i < 6; ++i)
    {
        const double a = deg2rad(30.0 + 60.0 * i);
        sites.emplace_back(center + isd * Vec2(std::cos(a), std::sin(a)));
    }
    std::vector<Trp> trps;
    int id = 0;
    for (std::size_t s = 0; s < sites.size(); ++s)
    {
        for (int k = 0; k < sectors_per_site; ++k)
        {
            Trp t;
            t.trp_id = id++;
            t.site_id = static_cast<int>(s);
            t.position = Vec3(sites[s].x(), sites[s].y(), 0.0);
            t.sectorized = sectors_per_site > 1;
            t.sector_azimuth_deg = 360.0 * k / sectors_per_site;
            trps.push_back(t);
        }
    }
    return trps;
}

std::vector<Trp> ioo_layout()
{
    std::vector<Trp> trps;
    int id = 0;
    for (double y : {15.0, 35.0})
    {
        for (int i = 0; i < 6; ++i)
        {
            Trp t;
            t.trp_id = id;
            t.site_id = id;
            ++id;
            t.position = Vec3(10.0 + 20.0 * i, y, 3.0);
            t.sectorized = false;
            trps.push_back(t);
        }
    }
    return trps;
}

void Deployment::validate() const
{
    numerology.validate();
    if (trps.empty())
        throw std::invalid_argument("Deployment: no TRPs");
    if (area.width <= 0.0 || area.height <= 0.0)
        throw std::invalid_argument("Deployment: empty area");
    if (carrier_hz <= 0.0)
        throw std::invalid_argument("Deployment: carrier frequency must be positive");
    for (const auto &t : trps)
    {
        t.array.validate();
        if (t.position.z() <= ue_height)
            throw std::invalid_argument("Deployment: TRP " + std::to_string(t.trp_id) + " not above UE height");
    }
}

Deployment make_deployment(ScenarioKind s, FrequencyRange fr, const DeploymentOptions &opt)
{
    const auto d = scenario_defaults(s);
    if (s != ScenarioKind::ioo && fr == FrequencyRange::fr2)
        throw std::invalid_argument("make_deployment: UMa/UMi are evaluated in FR1 only");
    Deployment dep;
    dep.scenario = s;
    dep.fr = fr;
    dep.isd = d.isd;
    dep.area = {opt.origin.x(), opt.origin.y(), d.area_side_x, d.area_side_y};
    dep.carrier_hz = fr == FrequencyRange::fr1 ? 2e9 : 28e9;
    const int scs = opt.scs_khz != 0 ? opt.scs_khz : (fr == FrequencyRange::fr1 ? 30 : 120);
    dep.numerology = Numerology::make(scs, opt.n_prb);
    dep.min_ue_distance = d.min_ue_distance;

    if (s == ScenarioKind::ioo)
    {
        dep.trps = ioo_layout();
        for (auto &t : dep.trps)
        {
            t.position.x() += opt.origin.x();
            t.position.y() += opt.origin.y();
            dep.site_centers.emplace_back(t.position.x(), t.position.y());
            // Ceiling mounted, facing down.
            t.array = opt.array;
            t.array.boresight_azimuth_deg = 0.0;
            t.array.boresight_zenith_deg = 180.0;
        }
        dep.drop_region = opt.drop_region.value_or(DropRegion::area);
    }
    else
    {
        dep.trps = hex_layout(d.isd, 3, dep.area.center());
        auto rng = substream(opt.seed, Stream::deployment, {static_cast<std::uint64_t>(s)});
        std::uniform_real_distribution<double> height(d.trp_height_min, d.trp_height_max);
        std::vector<double> site_height(7);
        for (auto &h : site_height)
            h = d.trp_height_min == d.trp_height_max ? d.trp_height_min : height(rng);
        for (auto &t : dep.trps)
        {
            t.position.z() = site_height[static_cast<std::size_t>(t.site_id)];
            t.array = opt.array;
            t.array.boresight_azimuth_deg = t.sector_azimuth_deg;
            t.array.boresight_zenith_deg = 90.0;
        }
        for (int site = 0; site < 7; ++site)
            dep.site_centers.emplace_back(dep.trps[static_cast<std::size_t>(3 * site)].position.head<2>());
        dep.drop_region = opt.drop_region.value_or(DropRegion::hex_coverage);
    }
    for (auto &t : dep.trps)
        t.tx_power_dbm = opt.tx_power_dbm.value_or(d.tx_power_dbm);
    dep.validate();
    return dep;
}

bool in_hex_coverage(const Deployment &dep, const Vec2 &p)
{
    const double apothem = dep.isd / 2.0;
    for (const auto &c : dep.site_centers)
    {
        bool inside = true;
        for (int i = 0; i < 6 && inside; ++i)
        {
            const double a = deg2rad(30.0 + 60.0 * i);
            inside = (p - c).dot(Vec2(std::cos(a), std::sin(a))) <= apothem + 1e-9;
        }
        if (inside)
            return true;
    }
    return false;
}

std::vector<Vec3> drop_ues(int n, const Deployment &dep, std::uint64_t seed)
{
    if (n < 1)
        throw std::invalid_argument("drop_ues: n must be at least 1");
    std::vector<Vec3> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
    {
        auto rng = substream(seed, Stream::ue_drop, {static_cast<std::uint64_t>(i)});
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int attempt = 0;; ++attempt)
        {
            if (attempt > 100000)
                throw std::runtime_error("drop_ues: drop region is empty");
            const Vec2 p(dep.area.x0 + u(rng) * dep.area.width, dep.area.y0 + u(rng) * dep.area.height);
            if (dep.drop_region == DropRegion::hex_coverage && !in_hex_coverage(dep, p))
                continue;
            bool far_enough = true;
            for (const auto &c : dep.site_centers)
                far_enough = far_enough && (p - c).norm() >= dep.min_ue_distance;
            if (!far_enough)
                continue;
            out.emplace_back(p.x(), p.y(), dep.ue_height);
            break;
        }
    }
    return out;
}

namespace
{

double cross(const Vec2 &o, const Vec2 &a, const Vec2 &b)
{
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

} // namespace

std::vector<Vec2> convex_hull(std::vector<Vec2> pts)
{
    if (pts.size() < 3)
        throw std::invalid_argument("convex_hull: need at least three points");
    std::sort(pts.begin(), pts.end(), [](const Vec2 &a, const Vec2 &b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    pts.erase(std::unique(pts.begin(), pts.end(), [](const Vec2 &a, const Vec2 &b) { return a == b; }), pts.end());
    if (pts.size() < 3)
        throw std::invalid_argument("convex_hull: fewer than three distinct points");
    std::vector<Vec2> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto &p : pts)
    {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0)
            --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i)
    {
        const auto &p = pts[i - 1];
        while (k >= t && cross(hull[k - 2], hull[k - 1], p) <= 0.0)
            --k;
        hull[k++] = p;
    }
    hull.resize(k - 1);
    if (hull.size() < 3)
        throw std::invalid_argument("convex_hull: collinear input");
    return hull;
}

bool point_in_hull(const Vec2 &p, const std::vector<Vec2> &hull, double eps)
{
    if (hull.size() < 3)
        return false;
    for (std::size_t i = 0; i < hull.size(); ++i)
    {
        const auto &a = hull[i];
        const auto &b = hull[(i + 1) % hull.size()];
        const double scale = std::max(1.0, (b - a).norm());
        if (cross(a, b, p) < -eps * scale)
            return false;
    }
    return true;
}

std::vector<Vec2> trp_xy(const Deployment &dep)
{
    std::vector<Vec2> out;
    for (const auto &t : dep.trps)
        out.emplace_back(t.position.head<2>());
    return out;
}

std::vector<int> assign_comb_offsets(Deployment &dep, int comb_size)
{
    if (comb_size != 2 && comb_size != 4 && comb_size != 6 && comb_size != 12)
        throw std::invalid_argument("assign_comb_offsets: comb size must be 2, 4, 6 or 12");
    std::vector<int> out;
    for (auto &t : dep.trps)
    {
        t.comb_offset = t.trp_id % comb_size;
        out.push_back(t.comb_offset);
    }
    return out;
}

} // namespace nrpos
