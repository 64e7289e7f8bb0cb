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

// Command-line front end: run an experiment, compare two summaries,
// re-solve a measurement log, or print a preset configuration.

#include "nrpos/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>

namespace
{

nrpos::json read_json_file(const std::string &path)
{
    std::ifstream f(path);
    if (!f)
        throw nrpos::ConfigError("cannot open " + path);
    try
    {
        return nrpos::json::parse(f);
    }
    catch (const nlohmann::json::parse_error &e)
    {
        throw nrpos::ConfigError(path + ": " + e.what());
    }
}

struct RunArgs
{
    std::string config;
    std::string preset;
    std::string method;
    int drops = 0;
    long long seed = -1;
    int threads = 0;
    std::string interference;
    bool noiseless = false;
    bool hull_split = false;
};

// Flags override the config file, which overrides the preset.
nrpos::ExperimentConfig build_config(const RunArgs &a)
{
    nrpos::ExperimentConfig cfg;
    if (!a.config.empty())
    {
        nrpos::json j = read_json_file(a.config);
        if (!a.preset.empty())
            j["preset"] = a.preset;
        cfg = nrpos::decode_experiment_config(j);
    }
    else
    {
        cfg = nrpos::preset_config(a.preset.empty() ? "ioo-fr1" : a.preset);
    }
    if (!a.method.empty())
        cfg.method = nrpos::method_from_string(a.method);
    if (a.drops > 0)
        cfg.n_drops = a.drops;
    if (a.seed >= 0)
        cfg.seed = static_cast<std::uint64_t>(a.seed);
    if (a.threads > 0)
        cfg.threads = a.threads;
    if (!a.interference.empty())
        cfg.interference = a.interference == "on";
    if (a.noiseless)
        cfg.noiseless = true;
    if (a.hull_split)
        cfg.hull_split = true;
    cfg.validate();
    return cfg;
}

int run(const RunArgs &a, const std::string &out_dir)
{
    const nrpos::ExperimentConfig cfg = build_config(a);
    const nrpos::ExperimentResult r = nrpos::run_experiment(cfg);
    nrpos::write_artifacts(r, cfg, out_dir);
    const auto &s = r.summary;
    std::cout << cfg.preset << ' ' << nrpos::to_string(cfg.method) << ": " << s.n_drops << " drops, "
              << s.n_converged << " converged, " << s.n_failed << " failed\n";
    for (const auto &[p, v] : s.percentiles)
        std::cout << "  p" << p << " = " << v << " m\n";
    std::cout << "  runtime " << s.runtime_s << " s, artifacts in " << out_dir << '\n';
    if (s.n_converged == 0)
    {
        std::cerr << "error: no converged fixes\n";
        return 3;
    }
    return 0;
}

int resolve(const RunArgs &a, const std::string &records_path, bool raw)
{
    const nrpos::ExperimentConfig cfg = build_config(a);
    const nrpos::Simulator sim(cfg);
    std::ifstream f(records_path);
    if (!f)
        throw nrpos::ConfigError("cannot open " + records_path);
    std::map<int, std::vector<nrpos::MeasurementRecord>> by_ue;
    for (auto &r : nrpos::read_jsonl(f))
        by_ue[r.ue_id].push_back(std::move(r));
    int converged = 0;
    std::cout << "ue_id,est_x,est_y,est_z,converged\n";
    for (const auto &[ue, recs] : by_ue)
    {
        try
        {
            const auto fix = nrpos::solve_records(cfg.method, sim.anchors(), recs, sim.solver_options(),
                                                  raw ? nrpos::RecordPayload::raw : nrpos::RecordPayload::quantized);
            std::cout << ue << ',' << fix.position.x() << ',' << fix.position.y() << ',' << fix.position.z() << ','
                      << (fix.converged ? 1 : 0) << '\n';
            converged += fix.converged ? 1 : 0;
        }
        catch (const std::exception &e)
        {
            std::cout << ue << ",nan,nan,nan,0\n";
            std::cerr << "ue " << ue << ": " << e.what() << '\n';
        }
    }
    return converged > 0 ? 0 : 3;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"nrpos: NR positioning link-level experiments"};
    app.require_subcommand(0, 1);

    RunArgs args;
    std::string out_dir = "out";
    auto add_run_flags = [&](CLI::App *a) {
        a->add_option("--config", args.config, "JSON experiment config");
        a->add_option("--preset", args.preset, "uma, umi, ioo-fr1 or ioo-fr2");
        a->add_option("--method", args.method, "dl-tdoa, ul-tdoa, multi-rtt, ul-aoa or dl-aod");
        a->add_option("--drops", args.drops, "number of UE drops")->check(CLI::PositiveNumber);
        a->add_option("--seed", args.seed, "master seed")->check(CLI::NonNegativeNumber);
        a->add_option("--threads", args.threads, "worker threads")->check(CLI::PositiveNumber);
        a->add_option("--interference", args.interference, "on or off")->check(CLI::IsMember({"on", "off"}));
        a->add_flag("--noiseless", args.noiseless, "ideal channel, no noise, unquantized reports");
        a->add_flag("--hull-split", args.hull_split, "report statistics inside and outside the TRP hull");
    };
    add_run_flags(&app);
    app.add_option("--out-dir", out_dir, "artifact directory");

    auto *cmp = app.add_subcommand("compare", "per-percentile deltas between two summary.json files");
    std::string sum_a, sum_b;
    cmp->add_option("a", sum_a)->required();
    cmp->add_option("b", sum_b)->required();

    auto *res = app.add_subcommand("resolve", "re-solve a measurements.jsonl log");
    std::string records_path;
    bool raw = false;
    res->add_option("records", records_path)->required();
    res->add_flag("--raw", raw, "use unquantized values");
    add_run_flags(res);

    auto *defaults = app.add_subcommand("print-defaults", "print the full configuration of a preset");
    std::string preset_name = "ioo-fr1";
    defaults->add_option("preset", preset_name)->check(CLI::IsMember(nrpos::preset_names()));

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*cmp)
        {
            const nrpos::json report = nrpos::compare_runs(read_json_file(sum_a), read_json_file(sum_b));
            std::cout << report.dump(2) << '\n';
            return report.at("comparable").get<bool>() ? 0 : 4;
        }
        if (*res)
            return resolve(args, records_path, raw);
        if (*defaults)
        {
            std::cout << nrpos::encode(nrpos::preset_config(preset_name)).dump(2) << '\n';
            return 0;
        }
        return run(args, out_dir);
    }
    catch (const nrpos::ConfigError &e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    catch (const std::invalid_argument &e)
    {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
