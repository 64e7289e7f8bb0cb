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

#include "nrpos/measurements.hpp"
#include "nrpos/fft.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <stdexcept>

namespace nrpos
{

ReferenceSignal ReferenceSignal::from_grid(const ResourceGrid &tx)
{
    ReferenceSignal ref;
    for (int l = 0; l < tx.symbols(); ++l)
        for (int k = 0; k < tx.subcarriers(); ++k)
            if (tx.occupied(k, l))
                ref.res.push_back({k, l, tx.at(k, l)});
    return ref;
}

std::vector<int> ReferenceSignal::subcarriers() const
{
    std::vector<int> out;
    out.reserve(res.size());
    for (const Re &re : res)
        out.push_back(re.k);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace
{

// Local maximum of |R(t)|^2 with R(t) = sum c exp(j 2 pi f t), started at t0.
// Steps are bounded by one delay bin; the parabolic value is kept if Newton
// wanders off or the curvature has the wrong sign.
double newton_peak(const std::vector<std::pair<double, cx>> &coeffs, double t0, double bin_s)
{
    double t = t0;
    for (int it = 0; it < 6; ++it)
    {
        cx r{0.0, 0.0}, r1{0.0, 0.0}, r2{0.0, 0.0};
        for (const auto &[f, c] : coeffs)
        {
            const double w = 2.0 * pi * f;
            const cx e = c * std::polar(1.0, w * t);
            r += e;
            r1 += cx{0.0, w} * e;
            r2 -= w * w * e;
        }
        const double g1 = 2.0 * std::real(std::conj(r) * r1);
        const double g2 = 2.0 * (std::norm(r1) + std::real(std::conj(r) * r2));
        if (!(g2 < 0.0))
            return t0;
        const double step = -g1 / g2;
        t += step;
        if (std::abs(t - t0) > bin_s)
            return t0;
        if (std::abs(step) < 1e-6 * bin_s)
            break;
    }
    return t;
}

} // namespace

std::optional<ToaEstimate> estimate_toa(const ResourceGrid &rx, const ReferenceSignal &ref, const Numerology &num,
                                        const ToaOptions &opt)
{
    if (ref.res.empty())
        throw std::invalid_argument("estimate_toa: empty reference");
    if (rx.subcarriers() != num.subcarriers())
        throw std::invalid_argument("estimate_toa: grid does not match numerology");
    if (opt.oversampling < 1)
        throw std::invalid_argument("estimate_toa: oversampling must be at least 1");

    const int n_sc = num.subcarriers();
    std::vector<cx> acc(static_cast<std::size_t>(n_sc), cx{0.0, 0.0});
    std::vector<int> count(static_cast<std::size_t>(n_sc), 0);
    for (const auto &re : ref.res)
    {
        acc[re.k] += rx.at(re.k, re.l) * std::conj(re.value) / std::norm(re.value);
        ++count[re.k];
    }

    const int size = num.fft_size * opt.oversampling;
    std::vector<cx> buf(static_cast<std::size_t>(size), cx{0.0, 0.0});
    for (int k = 0; k < n_sc; ++k)
    {
        if (count[k] == 0)
            continue;
        double w = 1.0;
        if (opt.hann_window)
        {
            const double s = std::sin(pi * (k + 0.5) / n_sc);
            w = s * s;
        }
        const int bin = ((k - n_sc / 2) % size + size) % size;
        buf[bin] = w * acc[k] / static_cast<double>(count[k]);
    }
    std::vector<std::pair<double, cx>> coeffs;  // (frequency offset, weight) for refinement
    if (opt.refine)
        for (int k = 0; k < n_sc; ++k)
            if (count[k] != 0)
                coeffs.emplace_back((k - n_sc / 2) * num.scs_hz(), buf[((k - n_sc / 2) % size + size) % size]);
    fft::transform(buf, fft::Direction::inverse);

    std::vector<double> p(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i)
        p[i] = std::norm(buf[i]);

    std::vector<double> sorted = p;
    auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
    std::nth_element(sorted.begin(), mid, sorted.end());
    // Median of an exponential distribution is ln 2 times its mean.
    const double noise = *mid / std::log(2.0);

    const double bins_per_s = num.sample_rate_hz() * opt.oversampling;
    const double period_s = 1.0 / num.scs_hz();
    const double wmax = opt.window_max_s.value_or(opt.window_min_s + period_s / 2.0);
    if (wmax <= opt.window_min_s || wmax - opt.window_min_s > period_s)
        throw std::invalid_argument("estimate_toa: invalid search window");
    const long n_from = static_cast<long>(std::ceil(opt.window_min_s * bins_per_s));
    const long n_to = static_cast<long>(std::floor(wmax * bins_per_s));
    auto wrap = [size](long n) { return static_cast<std::size_t>(((n % size) + size) % size); };

    double pmax = 0.0;
    long nmax = n_from;
    for (long n = n_from; n <= n_to; ++n)
    {
        if (p[wrap(n)] > pmax)
        {
            pmax = p[wrap(n)];
            nmax = n;
        }
    }
    const double sig2 = opt.noise_sigmas * opt.noise_sigmas;
    if (!(pmax > 0.0) || pmax < sig2 * noise)
        return std::nullopt;

    const double threshold = std::max(pmax * db_to_linear(-opt.threshold_db), sig2 * noise);
    long n_first = nmax;
    for (long n = n_from; n <= nmax; ++n)
    {
        const double c = p[wrap(n)];
        if (c >= threshold && c >= p[wrap(n - 1)] && c >= p[wrap(n + 1)])
        {
            n_first = n;
            break;
        }
    }

    const double a = std::sqrt(p[wrap(n_first - 1)]);
    const double b = std::sqrt(p[wrap(n_first)]);
    const double c = std::sqrt(p[wrap(n_first + 1)]);
    const double den = a - 2.0 * b + c;
    double delta = 0.0;
    if (den < 0.0)
        delta = std::clamp(0.5 * (a - c) / den, -0.5, 0.5);

    ToaEstimate est;
    est.toa_s = (static_cast<double>(n_first) + delta) / bins_per_s;
    if (opt.refine)
        est.toa_s = newton_peak(coeffs, est.toa_s, 1.0 / bins_per_s);
    est.peak_power = pmax;
    est.first_path_power = p[wrap(n_first)];
    est.noise_power = noise;
    est.snr_db = noise > 0.0 ? linear_to_db(pmax / noise) : std::numeric_limits<double>::infinity();
    return est;
}

std::optional<double> rstd(const std::optional<ToaEstimate> &target, const std::optional<ToaEstimate> &reference)
{
    if (!target || !reference)
        return std::nullopt;
    return rstd(target->toa_s, reference->toa_s);
}

RttValue rtt(double ue_rxtx_s, double gnb_rxtx_s)
{
    const double v = ue_rxtx_s + gnb_rxtx_s;
    if (v < 0.0)
        return {0.0, true};
    return {v, false};
}

double rsrp_dbm(const ResourceGrid &rx, const ReferenceSignal &ref)
{
    if (ref.res.empty())
        throw std::invalid_argument("rsrp_dbm: empty RE set");
    double s = 0.0;
    for (const auto &re : ref.res)
        s += std::norm(rx.at(re.k, re.l));
    return linear_to_db(s / static_cast<double>(ref.res.size()));
}

// ---- Angle of arrival ----------------------------------------------------

namespace
{

class Beamformer
{
public:
    Beamformer(const Eigen::MatrixXcd &x, const AntennaArray &array)
        : x_(x), rows_(array.rows), cols_(array.cols), d_(array.spacing_wavelengths)
    {
        std::tie(h_, v_) = array.panel_axes();
        b_ = array.boresight();
    }

    const Vec3 &h() const { return h_; }
    const Vec3 &v() const { return v_; }
    const Vec3 &b() const { return b_; }

    // Conjugate phase terms along one panel axis.
    std::vector<cx> phases(int n, double u) const
    {
        std::vector<cx> e(static_cast<std::size_t>(n));
        const double c0 = (n - 1) / 2.0;
        for (int i = 0; i < n; ++i)
            e[i] = std::polar(1.0, -2.0 * pi * d_ * (i - c0) * u);
        return e;
    }

    // Column sums for one horizontal direction cosine: s[r * L + l].
    std::vector<cx> column_sums(double uh) const
    {
        const std::vector<cx> ec = phases(cols_, uh);
        const int n_snap = static_cast<int>(x_.cols());
        std::vector<cx> s(static_cast<std::size_t>(rows_ * n_snap), cx{0.0, 0.0});
        for (int r = 0; r < rows_; ++r)
            for (int l = 0; l < n_snap; ++l)
            {
                cx acc{0.0, 0.0};
                for (int c = 0; c < cols_; ++c)
                    acc += ec[c] * x_(r * cols_ + c, l);
                s[r * n_snap + l] = acc;
            }
        return s;
    }

    double power_from_sums(const std::vector<cx> &s, double uv) const
    {
        const std::vector<cx> er = phases(rows_, uv);
        const int n_snap = static_cast<int>(x_.cols());
        double p = 0.0;
        for (int l = 0; l < n_snap; ++l)
        {
            cx acc{0.0, 0.0};
            for (int r = 0; r < rows_; ++r)
                acc += er[r] * s[r * n_snap + l];
            p += std::norm(acc);
        }
        const double m = static_cast<double>(rows_ * cols_);
        return p / (m * m * n_snap);
    }

    double power(double uh, double uv) const { return power_from_sums(column_sums(uh), uv); }

    double power(const Vec3 &u) const
    {
        if (u.dot(b_) < 0.0)
            return -1.0;
        return power(u.dot(h_), u.dot(v_));
    }

private:
    const Eigen::MatrixXcd &x_;
    int rows_;
    int cols_;
    double d_;
    Vec3 h_, v_, b_;
};

double parabolic_offset(double a, double b, double c)
{
    const double den = a - 2.0 * b + c;
    if (!(den < -1e-300))
        return 0.0;
    return std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
}

Angles tidy(Angles a, const AntennaArray &array)
{
    a.azimuth_deg = wrap_deg(a.azimuth_deg);
    if (a.zenith_deg < 1e-9 || a.zenith_deg > 180.0 - 1e-9)
        a.azimuth_deg = array.boresight_azimuth_deg;
    return a;
}

// One resolvable axis: search sin(psi) along `axis`, psi measured from the boresight.
Angles estimate_line(const Beamformer &bf, const AntennaArray &array, bool along_h, const AoaOptions &opt)
{
    auto power_at = [&](double psi_deg) {
        const double u = std::sin(deg2rad(psi_deg));
        return along_h ? bf.power(u, 0.0) : bf.power(0.0, u);
    };
    double best = -1.0, best_psi = 0.0;
    for (double psi = -90.0; psi <= 90.0 + 1e-9; psi += opt.fine_step_deg)
    {
        const double p = power_at(psi);
        if (p > best)
        {
            best = p;
            best_psi = psi;
        }
    }
    const double step = opt.fine_step_deg;
    if (std::abs(best_psi) < 90.0 - 1e-9)
        best_psi += step * parabolic_offset(power_at(best_psi - step), best, power_at(best_psi + step));
    const double s = std::sin(deg2rad(best_psi)), c = std::cos(deg2rad(best_psi));
    const Vec3 u = s * (along_h ? bf.h() : bf.v()) + c * bf.b();
    return tidy(Angles::from_vector(u), array);
}

} // namespace

double beamformer_power(const Eigen::MatrixXcd &snapshots, const AntennaArray &array, const Vec3 &direction)
{
    if (snapshots.rows() != array.size())
        throw std::invalid_argument("beamformer_power: snapshot rows do not match the array");
    return Beamformer(snapshots, array).power(direction);
}

Angles estimate_aoa(const Eigen::MatrixXcd &snapshots, const AntennaArray &array, const AoaOptions &opt)
{
    array.validate();
    if (array.size() < 2)
        throw std::invalid_argument("estimate_aoa: array needs at least two elements");
    if (snapshots.rows() != array.size() || snapshots.cols() < 1)
        throw std::invalid_argument("estimate_aoa: snapshot matrix does not match the array");
    if (!(snapshots.squaredNorm() > 0.0) || !snapshots.allFinite())
        throw std::invalid_argument("estimate_aoa: rank-deficient snapshots");

    const Beamformer bf(snapshots, array);
    if (array.rows == 1)
        return estimate_line(bf, array, true, opt);
    if (array.cols == 1)
        return estimate_line(bf, array, false, opt);

    // Coarse pass in direction cosines over the visible disc.
    const int n = static_cast<int>(std::floor(1.0 / opt.coarse_step_u));
    double best = -1.0, best_uh = 0.0, best_uv = 0.0;
    for (int i = -n; i <= n; ++i)
    {
        const double uh = i * opt.coarse_step_u;
        const std::vector<cx> s = bf.column_sums(uh);
        for (int j = -n; j <= n; ++j)
        {
            const double uv = j * opt.coarse_step_u;
            if (uh * uh + uv * uv > 1.0)
                continue;
            const double p = bf.power_from_sums(s, uv);
            if (p > best)
            {
                best = p;
                best_uh = uh;
                best_uv = uv;
            }
        }
    }
    const double w = std::sqrt(std::max(0.0, 1.0 - best_uh * best_uh - best_uv * best_uv));
    Angles centre = Angles::from_vector(best_uh * bf.h() + best_uv * bf.v() + w * bf.b());
    centre.azimuth_deg = std::round(centre.azimuth_deg / opt.fine_step_deg) * opt.fine_step_deg;
    centre.zenith_deg = std::round(centre.zenith_deg / opt.fine_step_deg) * opt.fine_step_deg;

    // Fine grid in angles, re-centred until the maximum is interior.
    auto power_at = [&](double az, double zen) {
        zen = std::clamp(zen, 0.0, 180.0);
        return bf.power(Angles{az, zen}.unit_vector());
    };
    const double step = opt.fine_step_deg;
    const int hw = std::max(1, opt.fine_half_width);
    Angles peak = centre;
    double peak_p = -1.0;
    for (int round = 0; round < 4; ++round)
    {
        int bi = 0, bj = 0;
        peak_p = -1.0;
        for (int i = -hw; i <= hw; ++i)
            for (int j = -hw; j <= hw; ++j)
            {
                const double zen = centre.zenith_deg + j * step;
                if (zen < 0.0 || zen > 180.0)
                    continue;
                const double p = power_at(centre.azimuth_deg + i * step, zen);
                if (p > peak_p)
                {
                    peak_p = p;
                    bi = i;
                    bj = j;
                }
            }
        peak = {centre.azimuth_deg + bi * step, centre.zenith_deg + bj * step};
        if (std::abs(bi) < hw && std::abs(bj) < hw)
            break;
        centre = peak;
    }

    Angles out = peak;
    out.azimuth_deg +=
        step * parabolic_offset(power_at(peak.azimuth_deg - step, peak.zenith_deg), peak_p,
                                power_at(peak.azimuth_deg + step, peak.zenith_deg));
    if (peak.zenith_deg - step >= 0.0 && peak.zenith_deg + step <= 180.0)
        out.zenith_deg +=
            step * parabolic_offset(power_at(peak.azimuth_deg, peak.zenith_deg - step), peak_p,
                                    power_at(peak.azimuth_deg, peak.zenith_deg + step));
    return tidy(out, array);
}

// ---- Quantisation --------------------------------------------------------

bool timing_k_valid(int k, FrequencyRange fr)
{
    const int lo = fr == FrequencyRange::fr1 ? 2 : 0;
    return k >= lo && k <= 5;
}

void TimingReport::validate() const
{
    if (!timing_k_valid(k, fr))
        throw std::invalid_argument("TimingReport: resolution exponent not allowed for this frequency range");
    if (value_tc < -timing_report_limit_tc || value_tc > timing_report_limit_tc)
        throw std::invalid_argument("TimingReport: value out of reporting range");
    if (value_tc % (std::int64_t{1} << k) != 0)
        throw std::invalid_argument("TimingReport: value not aligned to the resolution step");
}

TimingReport quantize_timing(double t_s, int k, FrequencyRange fr)
{
    if (!timing_k_valid(k, fr))
        throw std::invalid_argument("quantize_timing: resolution exponent not allowed for this frequency range");
    if (!std::isfinite(t_s))
        throw std::invalid_argument("quantize_timing: non-finite time");
    const std::int64_t step = std::int64_t{1} << k;
    const double steps = std::round(t_s / (static_cast<double>(step) * tc_seconds));
    TimingReport r;
    r.k = k;
    r.fr = fr;
    // The limit is a multiple of 32, so clamped values stay step-aligned.
    const double lim_steps = static_cast<double>(timing_report_limit_tc / step);
    if (steps > lim_steps || steps < -lim_steps)
    {
        r.clamped = true;
        r.value_tc = steps > 0 ? timing_report_limit_tc : -timing_report_limit_tc;
    }
    else
    {
        r.value_tc = static_cast<std::int64_t>(steps) * step;
    }
    return r;
}

PowerReport quantize_power(double p_dbm)
{
    PowerReport r;
    const double v = std::round(p_dbm);
    if (v < power_report_min_dbm || std::isnan(v))
    {
        r.value_dbm = power_report_min_dbm;
        r.clamped = true;
    }
    else if (v > power_report_max_dbm)
    {
        r.value_dbm = power_report_max_dbm;
        r.clamped = true;
    }
    else
    {
        r.value_dbm = static_cast<int>(v);
    }
    return r;
}

double aggregate_samples(std::span<const double> samples)
{
    if (samples.empty() || samples.size() > max_measurement_samples)
        throw std::invalid_argument("aggregate_samples: need between one and four samples");
    double s = 0.0;
    for (double x : samples)
        s += x;
    return s / static_cast<double>(samples.size());
}

} // namespace nrpos
