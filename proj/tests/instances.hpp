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

// Random solver instances and the forward models that generate them. The
// forward models are written from the geometry and do not call the library.
#pragma once

#include "nrpos/solvers.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace inst
{

using nrpos::Vec3;

constexpr double ue_height = 1.5;
constexpr double window = 200.0;  // instances live in [0, window]^2

struct Instance
{
    nrpos::AnchorMap anchors;
    std::vector<Vec3> anchor_list;
    Vec3 truth = Vec3::Zero();
    std::vector<nrpos::RstdMeasurement> rstd;
    std::vector<nrpos::RangeMeasurement> ranges;
    std::vector<nrpos::AngleMeasurement> angles;
    std::vector<nrpos::TrpBeams> beams;
};

inline double azimuth_deg(const Vec3 &from, const Vec3 &to)
{
    return std::atan2(to.y() - from.y(), to.x() - from.x()) * 180.0 / oracle::pi;
}

inline double zenith_deg(const Vec3 &from, const Vec3 &to)
{
    const Vec3 d = to - from;
    return std::atan2(std::hypot(d.x(), d.y()), d.z()) * 180.0 / oracle::pi;
}

inline nrpos::SolverOptions options_2d()
{
    nrpos::SolverOptions o;
    o.fix_height = ue_height;
    o.area = nrpos::Box{Vec3(0, 0, 0), Vec3(window, window, 40)};
    return o;
}

// Anchors scattered over the window, UE anywhere in it; rejects geometries
// that are close to singular for the method.
inline Instance random_geometry(oracle::Gen &g, nrpos::Method method)
{
    for (;;)
    {
        Instance in;
        const int n = g.integer(4, 8);
        for (int i = 0; i < n; ++i)
        {
            const Vec3 a(g.uniform(0, window), g.uniform(0, window), g.uniform(3, 30));
            in.anchors[i] = a;
            in.anchor_list.push_back(a);
        }
        in.truth = Vec3(g.uniform(0, window), g.uniform(0, window), ue_height);
        bool close = false;
        for (const Vec3 &a : in.anchor_list)
            close = close || std::hypot(a.x() - in.truth.x(), a.y() - in.truth.y()) < 5.0;
        for (std::size_t i = 0; i < in.anchor_list.size(); ++i)
            for (std::size_t j = i + 1; j < in.anchor_list.size(); ++j)
                close = close || (in.anchor_list[i] - in.anchor_list[j]).head<2>().norm() < 10.0;
        if (close)
            continue;
        const double gd = nrpos::gdop(in.anchor_list, in.truth, method, true);
        const double limit = (method == nrpos::Method::ul_aoa || method == nrpos::Method::dl_aod) ? 500.0 : 10.0;
        if (std::isfinite(gd) && gd < limit)
            return in;
    }
}

inline void fill_rstd(Instance &in, oracle::Gen *noise, double sigma_m)
{
    const Vec3 &ref = in.anchor_list[0];
    for (std::size_t i = 1; i < in.anchor_list.size(); ++i)
    {
        double m = (in.truth - in.anchor_list[i]).norm() - (in.truth - ref).norm();
        if (noise)
            m += noise->normal(sigma_m);
        in.rstd.push_back({static_cast<int>(i), 0, m});
    }
}

inline void fill_ranges(Instance &in, oracle::Gen *noise, double sigma_m)
{
    for (std::size_t i = 0; i < in.anchor_list.size(); ++i)
    {
        double m = (in.truth - in.anchor_list[i]).norm();
        if (noise)
            m += noise->normal(sigma_m);
        in.ranges.push_back({static_cast<int>(i), m});
    }
}

inline void fill_angles(Instance &in, oracle::Gen *noise, double sigma_deg)
{
    for (std::size_t i = 0; i < in.anchor_list.size(); ++i)
    {
        nrpos::AngleMeasurement m;
        m.trp = static_cast<int>(i);
        m.azimuth_deg = azimuth_deg(in.anchor_list[i], in.truth);
        m.zenith_deg = zenith_deg(in.anchor_list[i], in.truth);
        if (noise)
        {
            m.azimuth_deg += noise->normal(sigma_deg);
            *m.zenith_deg += noise->normal(sigma_deg);
        }
        in.angles.push_back(m);
    }
}

// Beams every `spacing` degrees around the true departure azimuth with a
// parabolic gain pattern. With offset 0 the true direction is on a beam and
// its two neighbours are symmetric, so the weighted mean is exact.
inline void fill_beams(Instance &in, oracle::Gen *noise, double rsrp_sigma_db, double offset_deg = 0.0)
{
    const double spacing = 15.0;
    for (std::size_t i = 0; i < in.anchor_list.size(); ++i)
    {
        nrpos::TrpBeams tb;
        tb.trp = static_cast<int>(i);
        const double az = azimuth_deg(in.anchor_list[i], in.truth);
        const double zen = zenith_deg(in.anchor_list[i], in.truth);
        for (int b = -3; b <= 3; ++b)
        {
            nrpos::BeamRsrp beam;
            beam.resource_id = b + 3;
            beam.direction = {az + offset_deg + b * spacing, zen};
            const double off = (b * spacing + offset_deg) / spacing;
            beam.rsrp_dbm = -70.0 - 3.0 * off * off;
            if (noise)
                beam.rsrp_dbm += noise->normal(rsrp_sigma_db);
            tb.beams.push_back(beam);
        }
        // weak beam at another zenith so the set spans elevation
        tb.beams.push_back({7, {az, zen + 20.0}, -120.0});
        in.beams.push_back(tb);
    }
}

inline nrpos::PositionFix solve(const Instance &in, nrpos::Method m, const nrpos::SolverOptions &opt)
{
    switch (m)
    {
    case nrpos::Method::dl_tdoa:
    case nrpos::Method::ul_tdoa: return nrpos::tdoa_solve(in.anchors, in.rstd, opt);
    case nrpos::Method::multi_rtt: return nrpos::rtt_solve(in.anchors, in.ranges, opt);
    case nrpos::Method::ul_aoa: return nrpos::aoa_solve(in.anchors, in.angles, opt);
    case nrpos::Method::dl_aod: return nrpos::aod_solve(in.anchors, in.beams, opt);
    }
    return {};
}

inline Instance make(oracle::Gen &g, nrpos::Method m, oracle::Gen *noise)
{
    Instance in = random_geometry(g, m);
    switch (m)
    {
    case nrpos::Method::dl_tdoa:
    case nrpos::Method::ul_tdoa: fill_rstd(in, noise, 1.0); break;
    case nrpos::Method::multi_rtt: fill_ranges(in, noise, 1.0); break;
    case nrpos::Method::ul_aoa: fill_angles(in, noise, 2.0); break;
    case nrpos::Method::dl_aod: fill_beams(in, noise, 1.0, noise ? g.uniform(-5.0, 5.0) : 0.0); break;
    }
    return in;
}

// Departure bearings as the location server derives them: linear-power
// weighted circular mean of the three strongest beams.
struct Bearing
{
    double azimuth_rad;
    double weight;
};

inline std::vector<Bearing> aod_bearings(const Instance &in)
{
    std::vector<Bearing> out;
    for (const auto &tb : in.beams)
    {
        std::vector<nrpos::BeamRsrp> b = tb.beams;
        std::stable_sort(b.begin(), b.end(), [](const auto &x, const auto &y) { return x.rsrp_dbm > y.rsrp_dbm; });
        double s = 0, c = 0;
        for (std::size_t i = 0; i < std::min<std::size_t>(3, b.size()); ++i)
        {
            const double w = std::pow(10.0, (b[i].rsrp_dbm - b[0].rsrp_dbm) / 10.0);
            s += w * std::sin(b[i].direction.azimuth_deg * oracle::pi / 180.0);
            c += w * std::cos(b[i].direction.azimuth_deg * oracle::pi / 180.0);
        }
        const bool flat = b.size() == 1 || b.front().rsrp_dbm - b.back().rsrp_dbm < 1.0;
        out.push_back({std::atan2(s, c), flat ? 0.1 : 1.0});
    }
    return out;
}

inline double wrap_pi(double a)
{
    a = std::fmod(a, 2 * oracle::pi);
    if (a <= -oracle::pi)
        a += 2 * oracle::pi;
    else if (a > oracle::pi)
        a -= 2 * oracle::pi;
    return a;
}

// Residual RMS of the 2D objective at (x, y), written out independently.
struct Objective
{
    nrpos::Method method;
    std::vector<double> ax, ay, dz2;
    std::vector<int> ref;
    std::vector<double> meas, weight;

    Objective(const Instance &in, nrpos::Method m) : method(m)
    {
        auto add_anchor = [&](const Vec3 &a) {
            ax.push_back(a.x());
            ay.push_back(a.y());
            dz2.push_back((a.z() - ue_height) * (a.z() - ue_height));
        };
        for (const Vec3 &a : in.anchor_list)
            add_anchor(a);
        switch (m)
        {
        case nrpos::Method::dl_tdoa:
        case nrpos::Method::ul_tdoa:
            for (const auto &r : in.rstd)
            {
                ref.push_back(r.trp);
                meas.push_back(r.meters);
                weight.push_back(1.0);
            }
            break;
        case nrpos::Method::multi_rtt:
            for (const auto &r : in.ranges)
            {
                ref.push_back(r.trp);
                meas.push_back(r.meters);
                weight.push_back(1.0);
            }
            break;
        case nrpos::Method::ul_aoa:
            for (const auto &a : in.angles)
            {
                ref.push_back(a.trp);
                meas.push_back(a.azimuth_deg * oracle::pi / 180.0);
                weight.push_back(a.weight);
            }
            break;
        case nrpos::Method::dl_aod:
        {
            const auto b = aod_bearings(in);
            for (std::size_t i = 0; i < b.size(); ++i)
            {
                ref.push_back(in.beams[i].trp);
                meas.push_back(b[i].azimuth_rad);
                weight.push_back(b[i].weight);
            }
            break;
        }
        }
    }

    double operator()(double x, double y) const
    {
        double s = 0.0;
        const std::size_t n = meas.size();
        switch (method)
        {
        case nrpos::Method::dl_tdoa:
        case nrpos::Method::ul_tdoa:
        {
            const double d0 = std::sqrt((x - ax[0]) * (x - ax[0]) + (y - ay[0]) * (y - ay[0]) + dz2[0]);
            for (std::size_t i = 0; i < n; ++i)
            {
                const int j = ref[i];
                const double d = std::sqrt((x - ax[j]) * (x - ax[j]) + (y - ay[j]) * (y - ay[j]) + dz2[j]);
                const double r = d - d0 - meas[i];
                s += r * r;
            }
            break;
        }
        case nrpos::Method::multi_rtt:
            for (std::size_t i = 0; i < n; ++i)
            {
                const int j = ref[i];
                const double r = std::sqrt((x - ax[j]) * (x - ax[j]) + (y - ay[j]) * (y - ay[j]) + dz2[j]) - meas[i];
                s += r * r;
            }
            break;
        case nrpos::Method::ul_aoa:
        case nrpos::Method::dl_aod:
            for (std::size_t i = 0; i < n; ++i)
            {
                const int j = ref[i];
                const double r = weight[i] * wrap_pi(std::atan2(y - ay[j], x - ax[j]) - meas[i]);
                s += r * r;
            }
            break;
        }
        return std::sqrt(s / static_cast<double>(n));
    }
};

} // namespace inst
