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

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>

namespace nrpos
{

using cx = std::complex<double>;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

constexpr double speed_of_light = 299792458.0;
constexpr double pi = std::numbers::pi;

constexpr double deg2rad(double deg) { return deg * pi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / pi; }

// Wrap an angle in degrees to (-180, 180].
inline double wrap_deg(double deg)
{
    double w = std::fmod(deg, 360.0);
    if (w <= -180.0)
        w += 360.0;
    else if (w > 180.0)
        w -= 360.0;
    return w;
}

inline double wrap_rad(double rad)
{
    double w = std::fmod(rad, 2.0 * pi);
    if (w <= -pi)
        w += 2.0 * pi;
    else if (w > pi)
        w -= 2.0 * pi;
    return w;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

// Direction in the global frame: azimuth from +x towards +y, zenith from +z.
struct Angles
{
    double azimuth_deg = 0.0;
    double zenith_deg = 90.0;

    Vec3 unit_vector() const
    {
        const double az = deg2rad(azimuth_deg), ze = deg2rad(zenith_deg);
        return {std::sin(ze) * std::cos(az), std::sin(ze) * std::sin(az), std::cos(ze)};
    }

    static Angles from_vector(const Vec3 &v)
    {
        const double rho = std::hypot(v.x(), v.y());
        return {rad2deg(std::atan2(v.y(), v.x())), rad2deg(std::atan2(rho, v.z()))};
    }
};

} // namespace nrpos
