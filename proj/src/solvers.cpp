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

#include "nrpos/solvers.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <memory>
#include <stdexcept>
#include <utility>

namespace nrpos
{

namespace
{

constexpr std::array<std::pair<Method, const char *>, 5> method_names{{
    {Method::dl_tdoa, "dl-tdoa"},
    {Method::ul_tdoa, "ul-tdoa"},
    {Method::multi_rtt, "multi-rtt"},
    {Method::ul_aoa, "ul-aoa"},
    {Method::dl_aod, "dl-aod"},
}};

const Vec3 &anchor(const AnchorMap &anchors, int id)
{
    auto it = anchors.find(id);
    if (it == anchors.end())
        throw std::invalid_argument("solver: measurement refers to unknown TRP " + std::to_string(id));
    return it->second;
}

// Residuals and Jacobian (rows x 3) of one measurement model.
struct Model
{
    virtual ~Model() = default;
    virtual Eigen::Index size() const = 0;
    virtual void eval(const Vec3 &x, Eigen::VectorXd &r, Eigen::MatrixXd *jac) const = 0;
    // Anchor positions involved, for start points and geometry checks.
    virtual std::vector<Vec3> anchor_points() const = 0;
    // Model restricted to a subset of measurement indices.
    virtual std::unique_ptr<Model> subset(const std::vector<std::size_t> &keep) const = 0;
    // Closed-form start points, if the model has any.
    virtual std::vector<Vec3> seeds(const std::optional<double> &) const { return {}; }
};

template <class T> std::vector<T> pick(const std::vector<T> &v, const std::vector<std::size_t> &keep)
{
    std::vector<T> out;
    for (std::size_t i : keep)
        out.push_back(v[i]);
    return out;
}

struct TdoaModel final : Model
{
    std::vector<Vec3> a, ref;
    std::vector<double> m;

    Eigen::Index size() const override { return static_cast<Eigen::Index>(m.size()); }
    void eval(const Vec3 &x, Eigen::VectorXd &r, Eigen::MatrixXd *jac) const override
    {
        r.resize(size());
        if (jac)
            jac->resize(size(), 3);
        for (Eigen::Index i = 0; i < size(); ++i)
        {
            const Vec3 da = x - a[i], dr = x - ref[i];
            const double na = da.norm(), nr = dr.norm();
            r(i) = (na - nr) - m[i];
            if (jac)
            {
                Vec3 g = Vec3::Zero();
                if (na > 0.0)
                    g += da / na;
                if (nr > 0.0)
                    g -= dr / nr;
                jac->row(i) = g.transpose();
            }
        }
    }
    std::vector<Vec3> anchor_points() const override
    {
        std::vector<Vec3> p = a;
        p.insert(p.end(), ref.begin(), ref.end());
        return p;
    }
    // Squaring d_i = d_0 + m_i makes the problem linear in (x, y[, z], d_0)
    // when every row shares one reference. Exact without noise, so it rescues
    // UEs far outside the anchor hull where the anchor starts can fall into a
    // local minimum.
    std::vector<Vec3> seeds(const std::optional<double> &fix_height) const override
    {
        if (m.empty())
            return {};
        for (const Vec3 &r : ref)
            if ((r - ref[0]).norm() > 0.0)
                return {};
        const Vec3 &a0 = ref[0];
        const int n_xyz = fix_height ? 2 : 3;
        if (size() < n_xyz + 1)
            return {};
        Eigen::MatrixXd A(size(), n_xyz + 1);
        Eigen::VectorXd b(size());
        for (Eigen::Index i = 0; i < size(); ++i)
        {
            const Vec3 d = a[i] - a0;
            A.row(i).head(n_xyz) = -2.0 * d.head(n_xyz).transpose();
            A(i, n_xyz) = -2.0 * m[i];
            b(i) = m[i] * m[i] - a[i].squaredNorm() + a0.squaredNorm();
            if (fix_height)
                b(i) += 2.0 * *fix_height * d.z();
        }
        const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
        if (qr.rank() < n_xyz + 1)
            return {};
        const Eigen::VectorXd sol = qr.solve(b);
        const Vec3 x(sol(0), sol(1), fix_height ? *fix_height : sol(2));
        if (!x.allFinite())
            return {};
        return {x};
    }
    std::unique_ptr<Model> subset(const std::vector<std::size_t> &keep) const override
    {
        auto s = std::make_unique<TdoaModel>();
        s->a = pick(a, keep);
        s->ref = pick(ref, keep);
        s->m = pick(m, keep);
        return s;
    }
};

struct RangeModel final : Model
{
    std::vector<Vec3> a;
    std::vector<double> m;

    Eigen::Index size() const override { return static_cast<Eigen::Index>(m.size()); }
    void eval(const Vec3 &x, Eigen::VectorXd &r, Eigen::MatrixXd *jac) const override
    {
        r.resize(size());
        if (jac)
            jac->resize(size(), 3);
        for (Eigen::Index i = 0; i < size(); ++i)
        {
            const Vec3 d = x - a[i];
            const double n = d.norm();
            r(i) = n - m[i];
            if (jac)
                jac->row(i) = (n > 0.0 ? Vec3(d / n) : Vec3::Zero()).transpose();
        }
    }
    std::vector<Vec3> anchor_points() const override { return a; }
    std::unique_ptr<Model> subset(const std::vector<std::size_t> &keep) const override
    {
        auto s = std::make_unique<RangeModel>();
        s->a = pick(a, keep);
        s->m = pick(m, keep);
        return s;
    }
};

// Angular residuals in radians; azimuth wrapped to (-pi, pi].
struct AngleModel final : Model
{
    struct Row
    {
        Vec3 a;
        bool zenith = false;  // false: azimuth row
        double value = 0.0;   // rad
        double weight = 1.0;
        std::size_t meas = 0;
    };
    std::vector<Row> rows;
    std::size_t n_meas = 0;

    Eigen::Index size() const override { return static_cast<Eigen::Index>(rows.size()); }
    void eval(const Vec3 &x, Eigen::VectorXd &r, Eigen::MatrixXd *jac) const override
    {
        r.resize(size());
        if (jac)
            jac->resize(size(), 3);
        for (Eigen::Index i = 0; i < size(); ++i)
        {
            const Row &row = rows[i];
            const Vec3 d = x - row.a;
            const double rho2 = d.x() * d.x() + d.y() * d.y();
            const double rho = std::sqrt(rho2);
            const double r2 = rho2 + d.z() * d.z();
            if (!row.zenith)
            {
                r(i) = row.weight * wrap_rad(std::atan2(d.y(), d.x()) - row.value);
                if (jac)
                {
                    Eigen::RowVector3d g = Eigen::RowVector3d::Zero();
                    if (rho2 > 0.0)
                        g << -d.y() / rho2, d.x() / rho2, 0.0;
                    jac->row(i) = g * row.weight;
                }
            }
            else
            {
                r(i) = row.weight * (std::atan2(rho, d.z()) - row.value);
                if (jac)
                {
                    Eigen::RowVector3d g = Eigen::RowVector3d::Zero();
                    if (rho > 0.0 && r2 > 0.0)
                        g << d.x() * d.z() / (rho * r2), d.y() * d.z() / (rho * r2), -rho / r2;
                    jac->row(i) = g * row.weight;
                }
            }
        }
    }
    std::vector<Vec3> anchor_points() const override
    {
        std::vector<Vec3> p;
        for (const Row &row : rows)
            p.push_back(row.a);
        return p;
    }
    std::unique_ptr<Model> subset(const std::vector<std::size_t> &keep) const override
    {
        auto s = std::make_unique<AngleModel>();
        for (std::size_t k = 0; k < keep.size(); ++k)
            for (const Row &row : rows)
                if (row.meas == keep[k])
                {
                    Row c = row;
                    c.meas = k;
                    s->rows.push_back(c);
                }
        s->n_meas = keep.size();
        return s;
    }
};

double rms(const Eigen::VectorXd &r) { return r.size() ? std::sqrt(r.squaredNorm() / r.size()) : 0.0; }

struct Run
{
    Vec3 x;
    double cost;
    int iterations;
    bool converged;
    std::vector<double> history;
};

// Iterates are kept inside the deployment area grown by a margin; biased
// TDOA data can otherwise have its least-squares minimum at infinity.
Vec2 clamp_xy(const Vec2 &p, const Box &area)
{
    const Vec2 lo = area.min.head<2>(), hi = area.max.head<2>();
    const double margin = 0.1 * (hi - lo).norm();
    return p.cwiseMax((lo.array() - margin).matrix()).cwiseMin((hi.array() + margin).matrix());
}

Run gauss_newton(const Model &model, Vec3 x, const SolverOptions &opt)
{
    const int n_free = opt.fix_height ? 2 : 3;
    if (opt.fix_height)
        x.z() = *opt.fix_height;
    Eigen::VectorXd r, rn;
    Eigen::MatrixXd jac;
    model.eval(x, r, nullptr);
    Run run{x, r.squaredNorm(), 0, false, {rms(r)}};
    for (int it = 0; it < opt.max_iterations; ++it)
    {
        run.iterations = it + 1;
        model.eval(run.x, r, &jac);
        const Eigen::MatrixXd jf = jac.leftCols(n_free);
        const Eigen::VectorXd step = jf.colPivHouseholderQr().solve(-r);
        if (!step.allFinite())
            break;
        double alpha = 1.0;
        bool accepted = false;
        Vec3 xn = run.x;
        for (int h = 0; h < 40; ++h, alpha *= 0.5)
        {
            xn = run.x;
            xn.head(n_free) += alpha * step;
            if (opt.area)
                xn.head<2>() = clamp_xy(xn.head<2>(), *opt.area);
            model.eval(xn, rn, nullptr);
            if (rn.allFinite() && rn.squaredNorm() <= run.cost)
            {
                accepted = true;
                break;
            }
        }
        if (!accepted)
        {
            // No descent left along the Gauss-Newton direction.
            run.converged = step.norm() * alpha < opt.tolerance_m || step.norm() < opt.tolerance_m;
            break;
        }
        run.x = xn;
        run.cost = rn.squaredNorm();
        run.history.push_back(rms(rn));
        if (alpha * step.norm() < opt.tolerance_m)
        {
            run.converged = true;
            break;
        }
    }
    return run;
}

void check_not_collinear(const std::vector<Vec3> &points)
{
    if (points.size() < 2)
        throw std::domain_error("solver: degenerate geometry");
    Vec2 mean = Vec2::Zero();
    for (const Vec3 &p : points)
        mean += p.head<2>();
    mean /= static_cast<double>(points.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const Vec3 &p : points)
    {
        const Vec2 d = p.head<2>() - mean;
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    if (es.eigenvalues()(0) <= 1e-12 * std::max(1.0, es.eigenvalues()(1)))
        throw std::domain_error("solver: degenerate geometry (collinear anchors)");
}

std::vector<Vec3> unique_points(const std::vector<Vec3> &pts)
{
    std::vector<Vec3> out;
    for (const Vec3 &p : pts)
    {
        bool dup = false;
        for (const Vec3 &q : out)
            if ((p.head<2>() - q.head<2>()).norm() < 1e-6)
                dup = true;
        if (!dup)
            out.push_back(p);
    }
    return out;
}

Run solve_multi(const Model &model, const SolverOptions &opt, std::optional<Vec3> guess)
{
    const std::vector<Vec3> anchors = unique_points(model.anchor_points());
    std::vector<Vec3> starts;
    starts.push_back(guess ? *guess : init_guess(anchors, {}, opt.fix_height));
    for (const Vec3 &s : model.seeds(opt.fix_height))
        starts.push_back(s);
    if (opt.multi_start)
    {
        const Vec3 c = init_guess(anchors, {}, opt.fix_height);
        for (const Vec3 &a : anchors)
        {
            Vec3 s = a + 0.1 * (c - a);
            s.z() = c.z();
            if ((s.head<2>() - a.head<2>()).norm() > 1e-6)
                starts.push_back(s);
        }
    }
    Run best = gauss_newton(model, starts.front(), opt);
    for (std::size_t i = 1; i < starts.size(); ++i)
    {
        Run r = gauss_newton(model, starts[i], opt);
        if (r.cost < best.cost * (1.0 - 1e-12) - 1e-300)
            best = std::move(r);
    }
    return best;
}

PositionFix solve(const Model &model, const SolverOptions &opt, Method method, std::size_t n_meas, int min_meas)
{
    opt.validate();
    std::vector<std::size_t> kept(n_meas);
    for (std::size_t i = 0; i < n_meas; ++i)
        kept[i] = i;
    std::unique_ptr<Model> current = model.subset(kept);
    Run run = solve_multi(*current, opt, opt.initial_guess);

    PositionFix fix;
    if (opt.nlos_rejection == NlosRejection::residual_trim)
    {
        for (int round = 0; round < 2 && static_cast<int>(kept.size()) > min_meas; ++round)
        {
            Eigen::VectorXd r;
            current->eval(run.x, r, nullptr);
            // Per-measurement magnitude; angle models have up to two rows each.
            std::vector<double> mag(kept.size(), 0.0);
            if (auto *am = dynamic_cast<const AngleModel *>(current.get()))
            {
                for (std::size_t i = 0; i < am->rows.size(); ++i)
                    mag[am->rows[i].meas] = std::max(mag[am->rows[i].meas], std::abs(r(i)));
            }
            else
            {
                for (std::size_t i = 0; i < kept.size(); ++i)
                    mag[i] = std::abs(r(static_cast<Eigen::Index>(i)));
            }
            std::vector<double> sorted = mag;
            std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
            const double median = sorted[sorted.size() / 2];
            const auto worst = std::max_element(mag.begin(), mag.end()) - mag.begin();
            if (!(mag[worst] > 3.0 * median))
                break;
            fix.rejected.push_back(kept[worst]);
            kept.erase(kept.begin() + worst);
            current = model.subset(kept);
            run = solve_multi(*current, opt, run.x);
        }
    }

    fix.position = run.x;
    fix.residual_rms = std::sqrt(run.cost / std::max<Eigen::Index>(1, current->size()));
    fix.iterations = run.iterations;
    fix.converged = run.converged;
    fix.method = method;
    fix.cost_history = std::move(run.history);
    return fix;
}

void check_count(std::size_t have, int need, const char *what)
{
    if (static_cast<int>(have) < need)
        throw std::invalid_argument(std::string("solver: insufficient ") + what);
}

PositionFix solve_angles(const AnchorMap &anchors, std::span<const AngleMeasurement> angles,
                         const SolverOptions &opt, Method method)
{
    const bool three_d = !opt.fix_height;
    AngleModel model;
    std::vector<Vec2> bearings;
    for (std::size_t i = 0; i < angles.size(); ++i)
    {
        const AngleMeasurement &m = angles[i];
        const Vec3 &a = anchor(anchors, m.trp);
        model.rows.push_back({a, false, deg2rad(m.azimuth_deg), m.weight, i});
        // With the height fixed only bearings are used: near-horizontal
        // arrivals carry almost no range information in zenith and a biased
        // zenith pulls the fix away from the TRPs.
        if (three_d && m.zenith_deg)
            model.rows.push_back({a, true, deg2rad(*m.zenith_deg), m.weight, i});
        else if (three_d)
            throw std::invalid_argument("aoa_solve: 3D solve needs zenith angles");
        bearings.emplace_back(std::cos(deg2rad(m.azimuth_deg)), std::sin(deg2rad(m.azimuth_deg)));
    }
    model.n_meas = angles.size();
    check_count(angles.size(), 2, "angle measurements (need at least two TRPs)");
    // Bearings that are all parallel never intersect.
    double max_cross = 0.0;
    for (std::size_t i = 0; i < bearings.size(); ++i)
        for (std::size_t j = i + 1; j < bearings.size(); ++j)
        {
            const double cross = bearings[i].x() * bearings[j].y() - bearings[i].y() * bearings[j].x();
            max_cross = std::max(max_cross, std::abs(cross));
        }
    bool any_zenith = false;
    for (const auto &m : angles)
        any_zenith = any_zenith || (three_d && m.zenith_deg.has_value());
    if (max_cross < 1e-9 && !any_zenith)
        throw std::domain_error("aoa_solve: parallel bearings do not intersect");
    return solve(model, opt, method, angles.size(), 2);
}

} // namespace

std::string to_string(Method m)
{
    for (const auto &[method, name] : method_names)
        if (method == m)
            return name;
    throw std::invalid_argument("unknown method");
}

Method method_from_string(const std::string &s)
{
    for (const auto &[method, name] : method_names)
        if (s == name)
            return method;
    throw std::invalid_argument("unknown positioning method: " + s);
}

void SolverOptions::validate() const
{
    if (!(tolerance_m > 0.0))
        throw std::invalid_argument("SolverOptions: tolerance must be positive");
    if (max_iterations < 1)
        throw std::invalid_argument("SolverOptions: max_iterations must be at least 1");
}

Vec3 init_guess(std::span<const Vec3> anchors, std::span<const double> rsrp_dbm, std::optional<double> fix_height)
{
    if (anchors.empty())
        throw std::invalid_argument("init_guess: no anchors");
    if (!rsrp_dbm.empty() && rsrp_dbm.size() != anchors.size())
        throw std::invalid_argument("init_guess: RSRP count does not match anchors");
    Vec3 c = Vec3::Zero();
    double wsum = 0.0;
    const double pmax = rsrp_dbm.empty() ? 0.0 : *std::max_element(rsrp_dbm.begin(), rsrp_dbm.end());
    double zsum = 0.0;
    for (std::size_t i = 0; i < anchors.size(); ++i)
    {
        const double w = rsrp_dbm.empty() ? 1.0 : db_to_linear(rsrp_dbm[i] - pmax);
        c += w * anchors[i];
        wsum += w;
        zsum += anchors[i].z();
    }
    c /= wsum;
    c.z() = fix_height ? *fix_height : zsum / static_cast<double>(anchors.size()) - 1.5;
    return c;
}

double tdoa_residual_rms(const AnchorMap &anchors, std::span<const RstdMeasurement> rstd, const Vec3 &x)
{
    double s = 0.0;
    for (const auto &m : rstd)
        s += std::pow((x - anchor(anchors, m.trp)).norm() - (x - anchor(anchors, m.reference)).norm() - m.meters, 2);
    return rstd.empty() ? 0.0 : std::sqrt(s / static_cast<double>(rstd.size()));
}

double rtt_residual_rms(const AnchorMap &anchors, std::span<const RangeMeasurement> ranges, const Vec3 &x)
{
    double s = 0.0;
    for (const auto &m : ranges)
        s += std::pow((x - anchor(anchors, m.trp)).norm() - m.meters, 2);
    return ranges.empty() ? 0.0 : std::sqrt(s / static_cast<double>(ranges.size()));
}

double aoa_residual_rms(const AnchorMap &anchors, std::span<const AngleMeasurement> angles, const Vec3 &x,
                        bool use_zenith)
{
    double s = 0.0;
    int n = 0;
    for (const auto &m : angles)
    {
        const Vec3 d = x - anchor(anchors, m.trp);
        s += std::pow(m.weight * wrap_rad(std::atan2(d.y(), d.x()) - deg2rad(m.azimuth_deg)), 2);
        ++n;
        if (use_zenith && m.zenith_deg)
        {
            s += std::pow(m.weight * (std::atan2(d.head<2>().norm(), d.z()) - deg2rad(*m.zenith_deg)), 2);
            ++n;
        }
    }
    return n ? std::sqrt(s / n) : 0.0;
}

PositionFix tdoa_solve(const AnchorMap &anchors, std::span<const RstdMeasurement> rstd, const SolverOptions &opt)
{
    check_count(rstd.size(), opt.fix_height ? 3 : 4, "RSTD measurements");
    TdoaModel model;
    for (const auto &m : rstd)
    {
        if (m.trp == m.reference)
            throw std::invalid_argument("tdoa_solve: RSTD against itself");
        model.a.push_back(anchor(anchors, m.trp));
        model.ref.push_back(anchor(anchors, m.reference));
        model.m.push_back(m.meters);
    }
    check_not_collinear(unique_points(model.anchor_points()));
    return solve(model, opt, Method::dl_tdoa, rstd.size(), opt.fix_height ? 3 : 4);
}

PositionFix rtt_solve(const AnchorMap &anchors, std::span<const RangeMeasurement> ranges, const SolverOptions &opt)
{
    check_count(ranges.size(), 3, "range measurements");
    RangeModel model;
    for (const auto &m : ranges)
    {
        model.a.push_back(anchor(anchors, m.trp));
        model.m.push_back(m.meters);
    }
    check_not_collinear(unique_points(model.a));
    PositionFix fix = solve(model, opt, Method::multi_rtt, ranges.size(), 3);
    if (!opt.fix_height && ranges.size() == 3)
    {
        // Two mirror solutions about the anchor plane; prefer the one in the area.
        const Vec3 n = (model.a[1] - model.a[0]).cross(model.a[2] - model.a[0]).normalized();
        const Vec3 mirror = fix.position - 2.0 * n.dot(fix.position - model.a[0]) * n;
        if (opt.area)
        {
            const bool in_fix = opt.area->contains(fix.position), in_mirror = opt.area->contains(mirror);
            const Vec3 centre = 0.5 * (opt.area->min + opt.area->max);
            if ((in_mirror && !in_fix) ||
                (in_mirror == in_fix && (mirror - centre).norm() < (fix.position - centre).norm()))
                fix.position = mirror;
        }
    }
    return fix;
}

PositionFix aoa_solve(const AnchorMap &anchors, std::span<const AngleMeasurement> angles, const SolverOptions &opt)
{
    return solve_angles(anchors, angles, opt, Method::ul_aoa);
}

AodEstimate estimate_aod(const TrpBeams &tb)
{
    if (tb.beams.empty())
        throw std::invalid_argument("estimate_aod: no beams");
    std::vector<BeamRsrp> beams = tb.beams;
    std::stable_sort(beams.begin(), beams.end(),
                     [](const BeamRsrp &a, const BeamRsrp &b) { return a.rsrp_dbm > b.rsrp_dbm; });
    const double pmax = beams.front().rsrp_dbm;
    const double pmin = beams.back().rsrp_dbm;
    double zmin = beams.front().direction.zenith_deg, zmax = zmin;
    for (const auto &b : beams)
    {
        zmin = std::min(zmin, b.direction.zenith_deg);
        zmax = std::max(zmax, b.direction.zenith_deg);
    }
    const std::size_t top = std::min<std::size_t>(3, beams.size());
    double s = 0.0, c = 0.0, z = 0.0, w_sum = 0.0;
    for (std::size_t i = 0; i < top; ++i)
    {
        const double w = db_to_linear(beams[i].rsrp_dbm - pmax);
        const double az = deg2rad(beams[i].direction.azimuth_deg);
        s += w * std::sin(az);
        c += w * std::cos(az);
        z += w * beams[i].direction.zenith_deg;
        w_sum += w;
    }
    AodEstimate est;
    est.trp = tb.trp;
    est.direction.azimuth_deg = rad2deg(std::atan2(s, c));
    est.has_zenith = zmax - zmin > 1e-9;
    est.direction.zenith_deg = est.has_zenith ? z / w_sum : beams.front().direction.zenith_deg;
    est.low_confidence = beams.size() == 1 || pmax - pmin < 1.0;
    est.weight = est.low_confidence ? 0.1 : 1.0;
    return est;
}

PositionFix aod_solve(const AnchorMap &anchors, std::span<const TrpBeams> beams, const SolverOptions &opt)
{
    int multi = 0;
    for (const auto &tb : beams)
        multi += tb.beams.size() >= 2 ? 1 : 0;
    if (multi < 2)
        throw std::invalid_argument("aod_solve: need at least two TRPs with two or more beams");
    std::vector<AngleMeasurement> angles;
    for (const auto &tb : beams)
    {
        const AodEstimate e = estimate_aod(tb);
        AngleMeasurement m;
        m.trp = tb.trp;
        m.azimuth_deg = e.direction.azimuth_deg;
        if (e.has_zenith)
            m.zenith_deg = e.direction.zenith_deg;
        m.weight = e.weight;
        angles.push_back(m);
    }
    if (!opt.fix_height)
        for (const auto &m : angles)
            if (!m.zenith_deg)
                throw std::invalid_argument("aod_solve: 3D solve needs beams that differ in zenith");
    return solve_angles(anchors, angles, opt, Method::dl_aod);
}

double gdop(std::span<const Vec3> anchors, const Vec3 &position, Method method, bool two_d)
{
    if (anchors.empty())
        throw std::invalid_argument("gdop: no anchors");
    const int n = two_d ? 2 : 3;
    std::vector<Eigen::RowVectorXd> rows;
    auto unit = [&](const Vec3 &a) {
        const Vec3 d = position - a;
        const double r = d.norm();
        return r > 0.0 ? Vec3(d / r) : Vec3(Vec3::Zero());
    };
    switch (method)
    {
    case Method::dl_tdoa:
    case Method::ul_tdoa:
        for (std::size_t i = 1; i < anchors.size(); ++i)
            rows.push_back((unit(anchors[i]) - unit(anchors[0])).head(n).transpose());
        break;
    case Method::multi_rtt:
        for (const Vec3 &a : anchors)
            rows.push_back(unit(a).head(n).transpose());
        break;
    case Method::ul_aoa:
    case Method::dl_aod:
        for (const Vec3 &a : anchors)
        {
            const Vec3 d = position - a;
            const double rho2 = d.head<2>().squaredNorm();
            if (rho2 <= 0.0)
                return std::numeric_limits<double>::infinity();
            rows.push_back(Eigen::RowVector3d(-d.y() / rho2, d.x() / rho2, 0.0).head(n));
            if (!two_d)
            {
                const double rho = std::sqrt(rho2), r2 = d.squaredNorm();
                rows.push_back(Eigen::RowVector3d(d.x() * d.z() / (rho * r2), d.y() * d.z() / (rho * r2), -rho / r2));
            }
        }
        break;
    }
    if (static_cast<int>(rows.size()) < n)
        return std::numeric_limits<double>::infinity();
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(rows.size()), n);
    for (std::size_t i = 0; i < rows.size(); ++i)
        jac.row(static_cast<Eigen::Index>(i)) = rows[i];
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jtj);
    const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(n - 1);
    if (!(lo > 1e-12 * std::max(hi, 1e-300)))
        return std::numeric_limits<double>::infinity();
    return std::sqrt((es.eigenvalues().array().inverse()).sum());
}

PositionFix solve_records(Method method, const AnchorMap &anchors, std::span<const MeasurementRecord> records,
                          const SolverOptions &opt, RecordPayload payload)
{
    const bool raw = payload == RecordPayload::raw;
    auto seconds = [raw](const MeasurementRecord &r) {
        if (raw)
            return r.raw;
        if (!r.timing)
            throw std::invalid_argument("solve_records: timing record without payload");
        return r.timing->seconds();
    };
    auto power = [raw](const MeasurementRecord &r) {
        return raw ? r.raw : static_cast<double>(r.power->value_dbm);
    };
    auto angles = [raw](const MeasurementRecord &r) {
        const auto &a = raw && r.raw_angles ? r.raw_angles : r.angles;
        if (!a)
            throw std::invalid_argument("solve_records: angle record without payload");
        return *a;
    };
    std::map<int, double> rsrp;
    for (const auto &r : records)
        if ((r.kind == MeasurementKind::prs_rsrp || r.kind == MeasurementKind::srs_rsrp) && r.power)
        {
            auto [it, inserted] = rsrp.emplace(r.trp_id, power(r));
            if (!inserted)
                it->second = std::max(it->second, power(r));
        }
    SolverOptions o = opt;
    if (!o.initial_guess && !rsrp.empty())
    {
        std::vector<Vec3> pts;
        std::vector<double> p;
        for (const auto &[id, v] : rsrp)
            if (anchors.count(id))
            {
                pts.push_back(anchors.at(id));
                p.push_back(v);
            }
        if (!pts.empty())
            o.initial_guess = init_guess(pts, p, o.fix_height);
    }

    switch (method)
    {
    case Method::dl_tdoa: {
        std::vector<RstdMeasurement> m;
        for (const auto &r : records)
            if (r.kind == MeasurementKind::rstd)
                m.push_back({r.trp_id, r.reference_trp_id.value(), speed_of_light * seconds(r)});
        return tdoa_solve(anchors, m, o);
    }
    case Method::ul_tdoa: {
        std::map<int, double> rtoa;
        for (const auto &r : records)
            if (r.kind == MeasurementKind::ul_rtoa)
                rtoa[r.trp_id] = seconds(r);
        if (rtoa.empty())
            throw std::invalid_argument("solve_records: no UL-RTOA records");
        int ref = rtoa.begin()->first;
        double best = -std::numeric_limits<double>::infinity();
        for (const auto &[id, v] : rsrp)
            if (rtoa.count(id) && v > best)
            {
                best = v;
                ref = id;
            }
        std::vector<RstdMeasurement> m;
        for (const auto &[id, t] : rtoa)
            if (id != ref)
                m.push_back({id, ref, speed_of_light * (t - rtoa.at(ref))});
        PositionFix fix = tdoa_solve(anchors, m, o);
        fix.method = Method::ul_tdoa;
        return fix;
    }
    case Method::multi_rtt: {
        std::map<int, double> ue, gnb;
        for (const auto &r : records)
        {
            if (r.kind == MeasurementKind::ue_rxtx)
                ue[r.trp_id] = seconds(r);
            else if (r.kind == MeasurementKind::gnb_rxtx)
                gnb[r.trp_id] = seconds(r);
        }
        std::vector<RangeMeasurement> m;
        for (const auto &[id, t] : ue)
            if (gnb.count(id))
                m.push_back({id, speed_of_light * rtt(t, gnb.at(id)).seconds / 2.0});
        return rtt_solve(anchors, m, o);
    }
    case Method::ul_aoa: {
        std::vector<AngleMeasurement> m;
        for (const auto &r : records)
            if (r.kind == MeasurementKind::aoa)
            {
                const Angles a = angles(r);
                m.push_back({r.trp_id, a.azimuth_deg, a.zenith_deg, 1.0});
            }
        return aoa_solve(anchors, m, o);
    }
    case Method::dl_aod: {
        std::map<int, TrpBeams> per;
        for (const auto &r : records)
            if (r.kind == MeasurementKind::prs_rsrp && r.angles && r.resource_id)
            {
                auto &tb = per[r.trp_id];
                tb.trp = r.trp_id;
                tb.beams.push_back({*r.resource_id, *r.angles, power(r)});
            }
        std::vector<TrpBeams> v;
        for (auto &[id, tb] : per)
            v.push_back(std::move(tb));
        return aod_solve(anchors, v, o);
    }
    }
    throw std::invalid_argument("solve_records: unknown method");
}

} // namespace nrpos
