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

// Acceptance runner: `nrpos_acceptance N` checks criterion N and prints one
// PASS/FAIL line. Exit status is 0 only on PASS.
#include "instances.hpp"
#include "session_fixture.hpp"

#include "nrpos/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

using namespace nrpos;

namespace
{

struct Verdict
{
    bool pass = false;
    std::string detail;
};

std::string fmt(const char *f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char *f, ...)
{
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double p90(const ExperimentConfig &c) { return run_experiment(c).summary.percentiles.at(90); }

ExperimentConfig preset(const std::string &name, Method m, int drops)
{
    ExperimentConfig c = preset_config(name);
    c.method = m;
    c.n_drops = drops;
    return c;
}

const Method all_methods[] = {Method::dl_tdoa, Method::ul_tdoa, Method::multi_rtt, Method::ul_aoa, Method::dl_aod};

Verdict property_suite()
{
    const std::string cmd = std::string("\"") + NRPOS_TESTS_BIN +
                            "\" \"[property],[numerology],[prs],[srs],[records]\" --reporter compact > /dev/null";
    const int rc = std::system(cmd.c_str());
    return {rc == 0, rc == 0 ? "all property tests passed" : fmt("test binary exited with %d", rc)};
}

Verdict noiseless_recovery()
{
    const SolverOptions opt = inst::options_2d();
    double worst = 0.0;
    std::string worst_method;
    for (Method m : all_methods)
    {
        oracle::Gen g(1000 + static_cast<int>(m));
        for (int i = 0; i < 500; ++i)
        {
            const inst::Instance in = inst::make(g, m, nullptr);
            double err = std::numeric_limits<double>::infinity();
            try
            {
                err = (inst::solve(in, m, opt).position - in.truth).norm();
            }
            catch (const std::exception &)
            {
            }
            if (!(err <= worst))
            {
                worst = err;
                worst_method = to_string(m);
            }
        }
    }
    return {worst < 1e-6, fmt("worst error %.3g m (%s) over 5x500 instances", worst, worst_method.c_str())};
}

// Exhaustive 0.1 m search over the whole 200 m window.
double exhaustive_min(const inst::Objective &f)
{
    double best = std::numeric_limits<double>::infinity();
    const int n = static_cast<int>(inst::window / 0.1);
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            best = std::min(best, f(i * 0.1, j * 0.1));
    return best;
}

Verdict solver_vs_oracle()
{
    const SolverOptions opt = inst::options_2d();
    int failures = 0;
    double worst_excess = -std::numeric_limits<double>::infinity();
    for (Method m : {Method::dl_tdoa, Method::multi_rtt, Method::ul_aoa, Method::dl_aod})
    {
        oracle::Gen g(2000 + static_cast<int>(m));
        oracle::Gen noise(3000 + static_cast<int>(m));
        for (int i = 0; i < 100; ++i)
        {
            const inst::Instance in = inst::make(g, m, &noise);
            const inst::Objective f(in, m);
            double solver = std::numeric_limits<double>::infinity();
            try
            {
                const PositionFix fix = inst::solve(in, m, opt);
                solver = f(fix.position.x(), fix.position.y());
            }
            catch (const std::exception &)
            {
            }
            const double grid = exhaustive_min(f);
            worst_excess = std::max(worst_excess, solver - grid);
            failures += solver <= grid ? 0 : 1;
        }
    }
    return {failures == 0,
            fmt("%d of 400 instances above the grid minimum; worst solver-grid residual %.3g", failures, worst_excess)};
}

Verdict bandwidth()
{
    const double fr1 = p90(preset("ioo-fr1", Method::dl_tdoa, 2000));
    ExperimentConfig c2 = preset("ioo-fr2", Method::dl_tdoa, 2000);
    c2.n_prb = 276;  // 397.44 MHz at 120 kHz
    const double fr2 = p90(c2);
    return {fr2 * 2.0 <= fr1, fmt("p90 FR1 %.3f m, FR2 %.3f m, ratio %.2f (need >= 2)", fr1, fr2, fr1 / fr2)};
}

Verdict sync_robustness()
{
    auto pair = [](Method m) {
        ExperimentConfig c = preset("ioo-fr1", m, 2000);
        const double base = p90(c);
        c.sync_error_std_s = 50e-9;
        return std::make_pair(base, p90(c));
    };
    const auto [rtt0, rtt1] = pair(Method::multi_rtt);
    const auto [tdoa0, tdoa1] = pair(Method::dl_tdoa);
    const double rtt_change = std::abs(rtt1 - rtt0) / rtt0;
    const double tdoa_change = (tdoa1 - tdoa0) / tdoa0;
    return {rtt_change < 0.05 && tdoa_change > 0.5,
            fmt("multi-RTT p90 %.3f -> %.3f m (%+.1f%%), DL-TDOA p90 %.3f -> %.3f m (%+.1f%%)", rtt0, rtt1,
                100 * (rtt1 - rtt0) / rtt0, tdoa0, tdoa1, 100 * tdoa_change)};
}

Verdict hull_advantage()
{
    ExperimentConfig c = preset("ioo-fr1", Method::dl_tdoa, 2000);
    c.drop_region = DropRegion::area;
    c.hull_split = true;
    const ResultSummary s = run_experiment(c).summary;
    if (!s.median_inside || !s.median_outside || !s.mean_gdop_inside || !s.mean_gdop_outside)
        return {false, "one side of the hull has no drops"};
    return {*s.median_inside < *s.median_outside && *s.mean_gdop_inside < *s.mean_gdop_outside,
            fmt("median inside %.3f m vs outside %.3f m; mean GDOP %.3f vs %.3f (n %d/%d)", *s.median_inside,
                *s.median_outside, *s.mean_gdop_inside, *s.mean_gdop_outside, s.n_inside, s.n_outside)};
}

Verdict comb_orthogonality()
{
    ExperimentConfig ioo = preset("ioo-fr1", Method::dl_tdoa, 500);
    const std::string on = results_csv(run_experiment(ioo));
    ioo.interference = false;
    const bool identical = results_csv(run_experiment(ioo)) == on;

    // Measurable: p90 rises and the paired per-drop error increase is more
    // than two standard errors above zero.
    ExperimentConfig uma = preset("uma", Method::dl_tdoa, 2000);
    const ExperimentResult with = run_experiment(uma);
    uma.interference = false;
    const ExperimentResult without = run_experiment(uma);
    std::vector<double> diff;
    for (std::size_t i = 0; i < with.drops.size(); ++i)
        if (with.drops[i].fix && without.drops[i].fix)
            diff.push_back(with.drops[i].horizontal_error() - without.drops[i].horizontal_error());
    double mean = 0.0, var = 0.0;
    for (double d : diff)
        mean += d / static_cast<double>(diff.size());
    for (double d : diff)
        var += (d - mean) * (d - mean) / static_cast<double>(diff.size() - 1);
    const double z = mean / std::sqrt(var / static_cast<double>(diff.size()));
    const double p_on = with.summary.percentiles.at(90), p_off = without.summary.percentiles.at(90);
    return {identical && p_on > p_off && z > 2.0,
            fmt("IOO on/off results %s; UMa p90 %.2f m with interference vs %.2f m without, paired mean increase "
                "%.2f m (z = %.1f)",
                identical ? "identical" : "differ", p_on, p_off, mean, z)};
}

Verdict antenna_count()
{
    double e[3];
    const int sizes[3] = {2, 4, 8};
    for (int i = 0; i < 3; ++i)
    {
        ExperimentConfig c = preset("ioo-fr1", Method::ul_aoa, 1000);
        c.array = AntennaArray{sizes[i], sizes[i]};
        c.aoa_snr_db = 10.0;
        e[i] = p90(c);
    }
    return {e[0] > e[1] && e[1] > e[2], fmt("p90 %.2f / %.2f / %.2f m for 2x2 / 4x4 / 8x8", e[0], e[1], e[2])};
}

Verdict session_conformance()
{
    const auto problems = sess::conformance(3);
    std::string detail = "multi-RTT and DL-TDOA flows conform";
    if (!problems.empty())
    {
        detail = problems.front();
        for (std::size_t i = 1; i < problems.size(); ++i)
            detail += "; " + problems[i];
    }
    return {problems.empty(), detail};
}

struct Criterion
{
    const char *name;
    double budget_s;
    std::function<Verdict()> run;
};

} // namespace

int main(int argc, char **argv)
{
    const Criterion criteria[] = {
        {"property suite", 60, property_suite},
        {"noiseless recovery", 30, noiseless_recovery},
        {"solver vs exhaustive grid", 300, solver_vs_oracle},
        {"FR2 bandwidth advantage", 600, bandwidth},
        {"multi-RTT sync robustness", 600, sync_robustness},
        {"convex hull", 600, hull_advantage},
        {"comb-12 orthogonality", 600, comb_orthogonality},
        {"antenna count", 600, antenna_count},
        {"session conformance", 60, session_conformance},
    };
    const int n = argc > 1 ? std::atoi(argv[1]) : 0;
    if (n < 1 || n > 9)
    {
        std::fprintf(stderr, "usage: %s <criterion 1-9>\n", argv[0]);
        return 2;
    }
    const Criterion &c = criteria[n - 1];
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try
    {
        v = c.run();
    }
    catch (const std::exception &e)
    {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = elapsed < c.budget_s;
    const bool pass = v.pass && in_time;
    std::printf("%s criterion %d (%s): %s [%.1f s of %.0f s]\n", pass ? "PASS" : "FAIL", n, c.name, v.detail.c_str(),
                elapsed, c.budget_s);
    return pass ? 0 : 1;
}
