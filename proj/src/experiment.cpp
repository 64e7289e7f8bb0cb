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

#include "nrpos/experiment.hpp"
#include "nrpos/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace nrpos
{

// ---- Configuration -------------------------------------------------------

const std::vector<std::string> &preset_names()
{
    static const std::vector<std::string> names{"uma", "umi", "ioo-fr1", "ioo-fr2"};
    return names;
}

ExperimentConfig preset_config(const std::string &name)
{
    ExperimentConfig c;
    c.preset = name;
    if (name == "uma")
        c.scenario = ScenarioKind::uma;
    else if (name == "umi")
        c.scenario = ScenarioKind::umi;
    else if (name == "ioo-fr1" || name == "ioo-fr2")
        c.scenario = ScenarioKind::ioo;
    else
        throw ConfigError("preset: unknown preset '" + name + "'");
    c.fr = name == "ioo-fr2" ? FrequencyRange::fr2 : FrequencyRange::fr1;
    c.scs_khz = c.fr == FrequencyRange::fr1 ? 30 : 120;
    c.carrier_hz = c.fr == FrequencyRange::fr1 ? 2e9 : 28e9;
    c.n_prb = 272;
    c.timing_k = c.fr == FrequencyRange::fr1 ? 2 : 0;
    c.channel = default_channel_params(c.scenario);
    c.solver.fix_height = 1.5;
    // Clock offsets can put the first path slightly before local zero.
    c.toa.window_min_s = -1e-6;
    return c;
}

void ExperimentConfig::validate() const
{
    auto fail = [](const std::string &m) { throw ConfigError(m); };
    if (n_drops < 1)
        fail("drops: must be at least 1");
    if (threads < 1)
        fail("threads: must be at least 1");
    if (scenario != ScenarioKind::ioo && fr == FrequencyRange::fr2 && !deployment)
        fail("frequency_range: UMa/UMi presets are FR1 only");
    if (!valid_prs_comb(dl_comb, dl_symbols))
        fail("signals: invalid DL comb/symbol combination");
    if (ul_comb != 2 && ul_comb != 4 && ul_comb != 8)
        fail("signals.ul_comb: expected 2, 4 or 8");
    if (!timing_k_valid(timing_k, fr))
        fail("signals.timing_k: not allowed for this frequency range");
    if (sync_error_std_s < 0.0 || ue_clock_offset_max_s < 0.0)
        fail("signals: clock parameters must be non-negative");
    if (aoa_snapshots < 1)
        fail("aoa.snapshots: must be at least 1");
    if (aod_beams < 2)
        fail("aod.beams: must be at least 2");
    if (carrier_hz <= 0.0)
        fail("deployment.carrier_hz: must be positive");
    try
    {
        validate_prs_bandwidth(n_prb);
        Numerology::make(scs_khz, n_prb).validate();
        channel.validate();
        solver.validate();
        array.validate();
    }
    catch (const ConfigError &)
    {
        throw;
    }
    catch (const std::invalid_argument &e)
    {
        fail(e.what());
    }
}

json encode(const ExperimentConfig &c)
{
    json j;
    j["schema_version"] = config_schema_version;
    j["preset"] = c.preset;
    j["method"] = to_string(c.method);
    j["drops"] = c.n_drops;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["interference"] = c.interference;
    j["hull_split"] = c.hull_split;
    j["noiseless"] = c.noiseless;
    json d;
    d["scenario"] = to_string(c.scenario);
    d["frequency_range"] = to_string(c.fr);
    d["scs_khz"] = c.scs_khz;
    d["n_prb"] = c.n_prb;
    d["carrier_hz"] = c.carrier_hz;
    d["tx_power_dbm"] = c.tx_power_dbm ? json(*c.tx_power_dbm) : json(nullptr);
    d["drop_region"] = c.drop_region ? json(*c.drop_region == DropRegion::area ? "area" : "hex_coverage") : json(nullptr);
    d["origin"] = json::array({c.origin.x(), c.origin.y()});
    if (c.deployment)
        d["inline"] = encode(*c.deployment);
    j["deployment"] = d;
    j["signals"] = {{"dl_comb", c.dl_comb},
                    {"dl_symbols", c.dl_symbols},
                    {"ul_comb", c.ul_comb},
                    {"ul_symbols", c.ul_symbols},
                    {"timing_k", c.timing_k},
                    {"ue_tx_power_dbm", c.ue_tx_power_dbm},
                    {"dl_noise_figure_db", c.dl_noise_figure_db},
                    {"ul_noise_figure_db", c.ul_noise_figure_db},
                    {"sync_error_std_s", c.sync_error_std_s},
                    {"ue_clock_offset_max_s", c.ue_clock_offset_max_s}};
    j["toa"] = {{"oversampling", c.toa.oversampling},
                {"threshold_db", c.toa.threshold_db},
                {"noise_sigmas", c.toa.noise_sigmas},
                {"hann_window", c.toa.hann_window},
                {"refine", c.toa.refine},
                {"window_min_s", c.toa.window_min_s}};
    j["channel"] = encode(c.channel);
    j["solver"] = encode(c.solver);
    j["aoa"] = {{"rows", c.array.rows},
                {"cols", c.array.cols},
                {"spacing_wavelengths", c.array.spacing_wavelengths},
                {"snr_db", c.aoa_snr_db ? json(*c.aoa_snr_db) : json(nullptr)},
                {"snapshots", c.aoa_snapshots}};
    j["aod"] = {{"beams", c.aod_beams}};
    return j;
}

namespace
{

template <class T> void take(const json &j, const char *key, T &out, const std::string &path)
{
    if (!j.contains(key))
        return;
    try
    {
        out = j.at(key).get<T>();
    }
    catch (const nlohmann::json::exception &)
    {
        throw ConfigError(path + "." + key + ": wrong type");
    }
}

template <class T> void take_opt(const json &j, const char *key, std::optional<T> &out, const std::string &path)
{
    if (!j.contains(key))
        return;
    if (j.at(key).is_null())
    {
        out.reset();
        return;
    }
    T v{};
    take(j, key, v, path);
    out = v;
}

} // namespace

ExperimentConfig decode_experiment_config(const json &j)
{
    if (!j.is_object())
        throw ConfigError("config: expected an object");
    check_schema_version(j);
    check_keys(j,
               {"schema_version", "preset", "method", "drops", "seed", "threads", "interference", "hull_split",
                "noiseless", "deployment", "signals", "toa", "channel", "solver", "aoa", "aod"},
               "config");
    std::string preset = "ioo-fr1";
    take(j, "preset", preset, "config");
    ExperimentConfig c = preset_config(preset);
    if (j.contains("method"))
    {
        try
        {
            c.method = method_from_string(j.at("method").get<std::string>());
        }
        catch (const std::exception &e)
        {
            throw ConfigError(std::string("config.method: ") + e.what());
        }
    }
    take(j, "drops", c.n_drops, "config");
    take(j, "seed", c.seed, "config");
    take(j, "threads", c.threads, "config");
    take(j, "interference", c.interference, "config");
    take(j, "hull_split", c.hull_split, "config");
    take(j, "noiseless", c.noiseless, "config");

    if (j.contains("deployment"))
    {
        const json &d = j.at("deployment");
        const std::string p = "config.deployment";
        check_keys(d,
                   {"scenario", "frequency_range", "scs_khz", "n_prb", "carrier_hz", "tx_power_dbm", "drop_region",
                    "origin", "inline"},
                   p);
        try
        {
            if (d.contains("scenario"))
                c.scenario = scenario_from_string(d.at("scenario").get<std::string>());
            if (d.contains("frequency_range"))
                c.fr = frequency_range_from_string(d.at("frequency_range").get<std::string>());
        }
        catch (const std::exception &e)
        {
            throw ConfigError(p + ": " + e.what());
        }
        take(d, "scs_khz", c.scs_khz, p);
        take(d, "n_prb", c.n_prb, p);
        take(d, "carrier_hz", c.carrier_hz, p);
        take_opt(d, "tx_power_dbm", c.tx_power_dbm, p);
        if (d.contains("drop_region") && !d.at("drop_region").is_null())
        {
            const auto s = d.at("drop_region").get<std::string>();
            if (s == "area")
                c.drop_region = DropRegion::area;
            else if (s == "hex_coverage")
                c.drop_region = DropRegion::hex_coverage;
            else
                throw ConfigError(p + ".drop_region: expected 'area' or 'hex_coverage'");
        }
        if (d.contains("origin"))
        {
            const json &o = d.at("origin");
            if (!o.is_array() || o.size() != 2)
                throw ConfigError(p + ".origin: expected [x, y]");
            c.origin = {o[0].get<double>(), o[1].get<double>()};
        }
        if (d.contains("inline"))
            c.deployment = decode_deployment(d.at("inline"), p + ".inline");
    }
    if (j.contains("signals"))
    {
        const json &s = j.at("signals");
        const std::string p = "config.signals";
        check_keys(s,
                   {"dl_comb", "dl_symbols", "ul_comb", "ul_symbols", "timing_k", "ue_tx_power_dbm",
                    "dl_noise_figure_db", "ul_noise_figure_db", "sync_error_std_s", "ue_clock_offset_max_s"},
                   p);
        take(s, "dl_comb", c.dl_comb, p);
        take(s, "dl_symbols", c.dl_symbols, p);
        take(s, "ul_comb", c.ul_comb, p);
        take(s, "ul_symbols", c.ul_symbols, p);
        take(s, "timing_k", c.timing_k, p);
        take(s, "ue_tx_power_dbm", c.ue_tx_power_dbm, p);
        take(s, "dl_noise_figure_db", c.dl_noise_figure_db, p);
        take(s, "ul_noise_figure_db", c.ul_noise_figure_db, p);
        take(s, "sync_error_std_s", c.sync_error_std_s, p);
        take(s, "ue_clock_offset_max_s", c.ue_clock_offset_max_s, p);
    }
    if (j.contains("toa"))
    {
        const json &t = j.at("toa");
        const std::string p = "config.toa";
        check_keys(t, {"oversampling", "threshold_db", "noise_sigmas", "hann_window", "refine", "window_min_s"}, p);
        take(t, "oversampling", c.toa.oversampling, p);
        take(t, "threshold_db", c.toa.threshold_db, p);
        take(t, "noise_sigmas", c.toa.noise_sigmas, p);
        take(t, "hann_window", c.toa.hann_window, p);
        take(t, "refine", c.toa.refine, p);
        take(t, "window_min_s", c.toa.window_min_s, p);
    }
    if (j.contains("channel"))
        c.channel = decode_channel_params(j.at("channel"), default_channel_params(c.scenario), "config.channel");
    else
        c.channel = default_channel_params(c.scenario);
    if (j.contains("solver"))
        c.solver = decode_solver_options(j.at("solver"), c.solver, "config.solver");
    if (j.contains("aoa"))
    {
        const json &a = j.at("aoa");
        const std::string p = "config.aoa";
        check_keys(a, {"rows", "cols", "spacing_wavelengths", "snr_db", "snapshots"}, p);
        take(a, "rows", c.array.rows, p);
        take(a, "cols", c.array.cols, p);
        take(a, "spacing_wavelengths", c.array.spacing_wavelengths, p);
        take_opt(a, "snr_db", c.aoa_snr_db, p);
        take(a, "snapshots", c.aoa_snapshots, p);
    }
    if (j.contains("aod"))
    {
        check_keys(j.at("aod"), {"beams"}, "config.aod");
        take(j.at("aod"), "beams", c.aod_beams, "config.aod");
    }
    c.validate();
    return c;
}

// ---- Simulation ----------------------------------------------------------

double DropOutcome::horizontal_error() const
{
    if (!fix)
        return std::numeric_limits<double>::quiet_NaN();
    return (fix->position.head<2>() - truth.head<2>()).norm();
}

double DropOutcome::vertical_error() const
{
    if (!fix)
        return std::numeric_limits<double>::quiet_NaN();
    return std::abs(fix->position.z() - truth.z());
}

std::vector<MeasurementRecord> Simulator::Measurements::all() const
{
    std::vector<MeasurementRecord> out = ue;
    for (const auto &[id, recs] : gnb)
        out.insert(out.end(), recs.begin(), recs.end());
    return out;
}

struct Simulator::DropState
{
    int drop = 0;
    Vec3 ue = Vec3::Zero();
    std::vector<LinkRealization> links;
    double ue_offset_s = 0.0;
    std::vector<double> sync_s;  // per TRP
};

namespace
{

std::vector<DlPrsResource> beam_resources(const Trp &t, const ExperimentConfig &cfg, int comb_offset)
{
    std::vector<DlPrsResource> out;
    DlPrsResource base;
    base.seq_id = t.trp_id % (max_prs_sequence_id + 1);
    base.comb_size = cfg.dl_comb;
    base.re_offset = comb_offset;
    base.n_symbols = cfg.dl_symbols;
    base.n_prb = cfg.n_prb;
    base.beam_azimuth_deg = t.sector_azimuth_deg;
    base.beam_zenith_deg = 90.0;
    if (cfg.method != Method::dl_aod)
    {
        out.push_back(base);
        return out;
    }
    const int n = cfg.aod_beams;
    if (t.sectorized)
    {
        for (int b = 0; b < n; ++b)
        {
            DlPrsResource r = base;
            r.resource_id = b;
            r.beam_azimuth_deg = wrap_deg(t.sector_azimuth_deg + (b - (n - 1) / 2.0) * (120.0 / n));
            r.beam_zenith_deg = 95.0;
            out.push_back(r);
        }
    }
    else
    {
        // Ceiling TRPs: two zenith rings of n azimuth beams.
        for (int ring = 0; ring < 2; ++ring)
            for (int b = 0; b < n; ++b)
            {
                DlPrsResource r = base;
                r.resource_id = ring * n + b;
                r.beam_azimuth_deg = wrap_deg(b * 360.0 / n);
                r.beam_zenith_deg = ring == 0 ? 115.0 : 145.0;
                out.push_back(r);
            }
    }
    return out;
}

} // namespace

Simulator::Simulator(ExperimentConfig cfg) : cfg_(std::move(cfg))
{
    cfg_.validate();
    if (cfg_.deployment)
    {
        dep_ = *cfg_.deployment;
    }
    else
    {
        DeploymentOptions opt;
        opt.seed = cfg_.seed;
        opt.origin = cfg_.origin;
        opt.scs_khz = cfg_.scs_khz;
        opt.n_prb = cfg_.n_prb;
        opt.tx_power_dbm = cfg_.tx_power_dbm;
        opt.array = cfg_.array;
        opt.drop_region = cfg_.drop_region;
        dep_ = make_deployment(cfg_.scenario, cfg_.fr, opt);
    }
    dep_.carrier_hz = cfg_.carrier_hz;
    const std::vector<int> offsets = assign_comb_offsets(dep_, cfg_.dl_comb);

    FrequencyLayer layer;
    for (std::size_t j = 0; j < dep_.trps.size(); ++j)
    {
        const Trp &t = dep_.trps[j];
        DlPrsResourceSet set;
        set.resources = beam_resources(t, cfg_, offsets[j]);
        TrpPrsConfig tc;
        tc.trp_id = t.trp_id;
        tc.sets.push_back(set);
        layer.trps.push_back(tc);
        trp_resources_.push_back(set.resources.front());

        ResourceGrid g = ResourceGrid::for_slot(dep_.numerology);
        map_dl_prs(g, set.resources.front(), 0);
        prs_refs_.push_back(ReferenceSignal::from_grid(g));
        prs_grids_.push_back(std::move(g));
    }
    prs_.layers.push_back(std::move(layer));
    prs_.validate();

    srs_.comb_size = cfg_.ul_comb;
    srs_.n_symbols = cfg_.ul_symbols;
    srs_.n_prb = cfg_.n_prb;
    srs_.validate();
    srs_grid_ = ResourceGrid::for_slot(dep_.numerology);
    map_srs(srs_grid_, srs_);
    srs_ref_ = ReferenceSignal::from_grid(srs_grid_);

    ues_ = drop_ues(cfg_.n_drops, dep_, cfg_.seed);
    hull_ = convex_hull(trp_xy(dep_));
}

AnchorMap Simulator::anchors() const
{
    AnchorMap m;
    for (const Trp &t : dep_.trps)
        m[t.trp_id] = t.position;
    return m;
}

SolverOptions Simulator::solver_options() const
{
    SolverOptions o = cfg_.solver;
    double zmax = 0.0;
    for (const Trp &t : dep_.trps)
        zmax = std::max(zmax, t.position.z());
    o.area = Box{Vec3(dep_.area.x0, dep_.area.y0, 0.0),
                 Vec3(dep_.area.x0 + dep_.area.width, dep_.area.y0 + dep_.area.height, zmax)};
    return o;
}

std::vector<LinkRealization> Simulator::links(int drop) const
{
    if (drop < 0 || drop >= static_cast<int>(ues_.size()))
        throw std::out_of_range("Simulator: drop index out of range");
    ChannelParams params = cfg_.channel;
    params.ideal = params.ideal || cfg_.noiseless;
    std::vector<LinkRealization> out;
    for (std::size_t j = 0; j < dep_.trps.size(); ++j)
    {
        auto rng = substream(cfg_.seed, Stream::link, {static_cast<std::uint64_t>(drop), j});
        out.push_back(realize_link(rng, params, dep_.trps[j], ues_[drop], dep_.carrier_hz,
                                   dep_.numerology.sample_period_s()));
    }
    return out;
}

Simulator::DropState Simulator::prepare(int drop) const
{
    DropState s;
    s.drop = drop;
    s.links = links(drop);
    s.ue = ues_[drop];
    auto clock = substream(cfg_.seed, Stream::clock, {static_cast<std::uint64_t>(drop)});
    s.ue_offset_s = std::uniform_real_distribution<double>(-cfg_.ue_clock_offset_max_s, cfg_.ue_clock_offset_max_s)(clock);
    auto sync = substream(cfg_.seed, Stream::sync_error, {static_cast<std::uint64_t>(drop)});
    std::normal_distribution<double> n01;
    for (std::size_t j = 0; j < dep_.trps.size(); ++j)
        s.sync_s.push_back(cfg_.sync_error_std_s * n01(sync));
    return s;
}

TimingReport Simulator::quantize(double t) const { return quantize_timing(t, cfg_.timing_k, cfg_.fr); }

namespace
{

MeasurementRecord timing_record(MeasurementKind kind, int ue, int trp, double value, const TimingReport &q)
{
    MeasurementRecord r;
    r.kind = kind;
    r.ue_id = ue;
    r.trp_id = trp;
    r.resource_id = 0;
    r.timing = q;
    r.raw = value;
    return r;
}

MeasurementRecord power_record(MeasurementKind kind, int ue, int trp, int resource, double dbm)
{
    MeasurementRecord r;
    r.kind = kind;
    r.ue_id = ue;
    r.trp_id = trp;
    r.resource_id = resource;
    r.power = quantize_power(dbm);
    r.raw = dbm;
    return r;
}

} // namespace

void Simulator::measure_dl_timing(const DropState &s, Measurements &m) const
{
    const Numerology &num = dep_.numerology;
    const std::size_t n = dep_.trps.size();
    std::vector<Contribution> contribs(n);
    for (std::size_t j = 0; j < n; ++j)
    {
        const Trp &t = dep_.trps[j];
        Contribution &c = contribs[j];
        c.tx = &prs_grids_[j];
        c.link = &s.links[j];
        c.tx_power_dbm = epre_dbm(t.tx_power_dbm, num.subcarriers());
        if (t.sectorized)
            c.sector = SectorPattern{t.sector_azimuth_deg, cfg_.channel.sector_hpbw_deg, cfg_.channel.sector_front_back_db};
        // TRP j transmits at its local zero, which is true time -sync_j;
        // the UE clock runs ue_offset ahead of true time.
        c.extra_delay_s = s.ue_offset_s - s.sync_s[j];
    }
    std::optional<NoiseModel> noise;
    if (!cfg_.noiseless)
        noise = NoiseModel::per_re(cfg_.dl_noise_figure_db, num);
    const std::uint64_t seed = substream_seed(cfg_.seed, Stream::noise, {static_cast<std::uint64_t>(s.drop), 0});

    std::vector<std::optional<ToaEstimate>> toa(n);
    std::vector<double> rsrp(n);
    ResourceGrid shared;
    if (cfg_.interference)
        shared = received_grid(contribs, noise, num, seed, NoiseFill::occupied);
    for (std::size_t j = 0; j < n; ++j)
    {
        ResourceGrid own;
        if (!cfg_.interference)
            own = received_grid(std::span<const Contribution>(&contribs[j], 1), noise, num, seed, NoiseFill::occupied);
        const ResourceGrid &rx = cfg_.interference ? shared : own;
        toa[j] = estimate_toa(rx, prs_refs_[j], num, cfg_.toa);
        rsrp[j] = rsrp_dbm(rx, prs_refs_[j]);
    }

    for (std::size_t j = 0; j < n; ++j)
        m.ue.push_back(power_record(MeasurementKind::prs_rsrp, s.drop, dep_.trps[j].trp_id, 0, rsrp[j]));

    if (cfg_.method == Method::dl_tdoa)
    {
        int ref = -1;
        for (std::size_t j = 0; j < n; ++j)
            if (toa[j] && (ref < 0 || rsrp[j] > rsrp[static_cast<std::size_t>(ref)]))
                ref = static_cast<int>(j);
        if (ref < 0)
            return;
        for (std::size_t j = 0; j < n; ++j)
        {
            if (static_cast<int>(j) == ref || !toa[j])
                continue;
            const double v = rstd(toa[j]->toa_s, toa[static_cast<std::size_t>(ref)]->toa_s);
            MeasurementRecord r = timing_record(MeasurementKind::rstd, s.drop, dep_.trps[j].trp_id, v, quantize(v));
            r.reference_trp_id = dep_.trps[static_cast<std::size_t>(ref)].trp_id;
            m.ue.push_back(r);
        }
    }
    else if (cfg_.method == Method::multi_rtt)
    {
        // The UE transmits its SRS at local time zero.
        for (std::size_t j = 0; j < n; ++j)
            if (toa[j])
            {
                const double v = rx_tx_difference(toa[j]->toa_s, 0.0);
                m.ue.push_back(timing_record(MeasurementKind::ue_rxtx, s.drop, dep_.trps[j].trp_id, v, quantize(v)));
            }
    }
}

void Simulator::measure_ul_timing(const DropState &s, Measurements &m) const
{
    const Numerology &num = dep_.numerology;
    for (std::size_t j = 0; j < dep_.trps.size(); ++j)
    {
        const Trp &t = dep_.trps[j];
        Contribution c;
        c.tx = &srs_grid_;
        c.link = &s.links[j];
        c.tx_power_dbm = epre_dbm(cfg_.ue_tx_power_dbm, num.subcarriers());
        if (t.sectorized)
            c.sector = SectorPattern{t.sector_azimuth_deg, cfg_.channel.sector_hpbw_deg, cfg_.channel.sector_front_back_db};
        // UE transmits at its local zero (true -ue_offset); TRP clock is sync_j ahead.
        c.extra_delay_s = s.sync_s[j] - s.ue_offset_s;
        std::optional<NoiseModel> noise;
        if (!cfg_.noiseless)
            noise = NoiseModel::per_re(cfg_.ul_noise_figure_db, num);
        const std::uint64_t seed =
            substream_seed(cfg_.seed, Stream::noise, {static_cast<std::uint64_t>(s.drop), 1 + j});
        const ResourceGrid rx = received_grid(std::span<const Contribution>(&c, 1), noise, num, seed, NoiseFill::occupied);
        const auto toa = estimate_toa(rx, srs_ref_, num, cfg_.toa);
        auto &out = m.gnb[t.trp_id];
        out.push_back(power_record(MeasurementKind::srs_rsrp, s.drop, t.trp_id, srs_.resource_id, rsrp_dbm(rx, srs_ref_)));
        if (!toa)
            continue;
        if (cfg_.method == Method::multi_rtt)
        {
            const double v = rx_tx_difference(toa->toa_s, 0.0);
            out.push_back(timing_record(MeasurementKind::gnb_rxtx, s.drop, t.trp_id, v, quantize(v)));
        }
        else
        {
            out.push_back(timing_record(MeasurementKind::ul_rtoa, s.drop, t.trp_id, toa->toa_s, quantize(toa->toa_s)));
        }
    }
}

void Simulator::measure_aoa(const DropState &s, Measurements &m) const
{
    const Numerology &num = dep_.numerology;
    std::vector<int> sc;
    for (const auto &re : srs_ref_.res)
        sc.push_back(re.k);
    std::vector<double> rx(dep_.trps.size());
    std::map<int, std::size_t> best_sector;  // site -> strongest SRS-RSRP
    for (std::size_t j = 0; j < dep_.trps.size(); ++j)
    {
        const Trp &t = dep_.trps[j];
        const LinkRealization &link = s.links[j];
        rx[j] = epre_dbm(cfg_.ue_tx_power_dbm, num.subcarriers()) - link.path_loss_db - link.shadow_db;
        if (t.sectorized)
        {
            rx[j] += SectorPattern{t.sector_azimuth_deg, cfg_.channel.sector_hpbw_deg, cfg_.channel.sector_front_back_db}
                         .gain_db(link.aoa_true.azimuth_deg);
            auto [it, fresh] = best_sector.emplace(t.site_id, j);
            if (!fresh && rx[j] + linear_to_db(link.total_tap_power()) >
                              rx[it->second] + linear_to_db(s.links[it->second].total_tap_power()))
                it->second = j;
        }
    }
    for (std::size_t j = 0; j < dep_.trps.size(); ++j)
    {
        const Trp &t = dep_.trps[j];
        const LinkRealization &link = s.links[j];
        const double rx_dbm = rx[j];
        std::optional<double> noise_mw;
        SnapshotConfig sc_cfg;
        sc_cfg.n_snapshots = cfg_.aoa_snapshots;
        if (!cfg_.noiseless)
        {
            noise_mw = NoiseModel::per_re(cfg_.ul_noise_figure_db, num).power_mw();
            sc_cfg.snr_db = cfg_.aoa_snr_db;
        }
        const std::uint64_t seed =
            substream_seed(cfg_.seed, Stream::snapshot, {static_cast<std::uint64_t>(s.drop), j});
        const Eigen::MatrixXcd x = array_snapshots(link, rx_dbm, t.array, sc, num, noise_mw, sc_cfg, seed);
        auto &out = m.gnb[t.trp_id];
        out.push_back(power_record(MeasurementKind::srs_rsrp, s.drop, t.trp_id, srs_.resource_id,
                                   rx_dbm + linear_to_db(link.total_tap_power())));
        // A planar panel cannot tell front from back; only the sector facing
        // the UE reports an angle.
        if (t.sectorized && best_sector.at(t.site_id) != j)
            continue;
        Angles est;
        try
        {
            est = estimate_aoa(x, t.array);
        }
        catch (const std::invalid_argument &)
        {
            continue;
        }
        MeasurementRecord r;
        r.kind = MeasurementKind::aoa;
        r.ue_id = s.drop;
        r.trp_id = t.trp_id;
        r.resource_id = srs_.resource_id;
        r.angles = est;
        r.raw_angles = est;
        out.push_back(r);
    }
}

void Simulator::measure_aod(const DropState &s, Measurements &m) const
{
    const Numerology &num = dep_.numerology;
    const double noise_sigma =
        cfg_.noiseless ? 0.0 : std::sqrt(NoiseModel::per_re(cfg_.dl_noise_figure_db, num).power_mw());
    for (std::size_t j = 0; j < dep_.trps.size(); ++j)
    {
        const Trp &t = dep_.trps[j];
        const auto &resources = prs_.layers.front().trps[j].sets.front().resources;
        for (const DlPrsResource &res : resources)
        {
            Contribution c;
            c.tx = &prs_grids_[j];
            c.link = &s.links[j];
            c.tx_power_dbm = epre_dbm(t.tx_power_dbm, num.subcarriers());
            if (t.sectorized)
                c.sector =
                    SectorPattern{t.sector_azimuth_deg, cfg_.channel.sector_hpbw_deg, cfg_.channel.sector_front_back_db};
            const double az_width = t.sectorized ? 120.0 / cfg_.aod_beams : 360.0 / cfg_.aod_beams;
            c.beam = BeamPattern{{res.beam_azimuth_deg, res.beam_zenith_deg}, az_width, 30.0, 30.0};
            const std::vector<cx> h = frequency_response(c, num);
            const std::uint64_t seed = substream_seed(
                cfg_.seed, Stream::noise,
                {static_cast<std::uint64_t>(s.drop), 1000 + j * 64 + static_cast<std::uint64_t>(res.resource_id)});
            double acc = 0.0;
            for (const auto &re : prs_refs_[j].res)
            {
                cx y = h[static_cast<std::size_t>(re.k)] * re.value;
                if (noise_sigma > 0.0)
                    y += noise_sigma * counter_gaussian(seed, prs_grids_[j].index(re.k, re.l));
                acc += std::norm(y);
            }
            const double dbm = linear_to_db(acc / static_cast<double>(prs_refs_[j].res.size()));
            MeasurementRecord r = power_record(MeasurementKind::prs_rsrp, s.drop, t.trp_id, res.resource_id, dbm);
            r.angles = Angles{res.beam_azimuth_deg, res.beam_zenith_deg};
            m.ue.push_back(r);
        }
    }
}

Simulator::Measurements Simulator::measure(int drop) const
{
    const DropState s = prepare(drop);
    Measurements m;
    switch (cfg_.method)
    {
    case Method::dl_tdoa:
        measure_dl_timing(s, m);
        break;
    case Method::multi_rtt:
        measure_dl_timing(s, m);
        measure_ul_timing(s, m);
        break;
    case Method::ul_tdoa:
        measure_ul_timing(s, m);
        break;
    case Method::ul_aoa:
        measure_aoa(s, m);
        break;
    case Method::dl_aod:
        measure_aod(s, m);
        break;
    }
    return m;
}

DropOutcome Simulator::run_drop(int drop) const
{
    DropOutcome out;
    out.ue_id = drop;
    out.truth = ues_.at(static_cast<std::size_t>(drop));
    out.records = measure(drop).all();
    try
    {
        out.fix = solve_records(cfg_.method, anchors(), out.records, solver_options(), payload());
    }
    catch (const std::exception &e)
    {
        out.failure = e.what();
    }
    out.in_hull = point_in_hull(out.truth.head<2>(), hull_);
    std::vector<Vec3> pts;
    for (const Trp &t : dep_.trps)
        pts.push_back(t.position);
    out.gdop = gdop(pts, out.truth, cfg_.method, cfg_.solver.fix_height.has_value());
    return out;
}

// ---- Statistics and artifacts --------------------------------------------

double percentile(std::vector<double> v, double p)
{
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    if (p < 0.0 || p > 100.0)
        throw std::invalid_argument("percentile: p outside 0..100");
    std::sort(v.begin(), v.end());
    const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double f = pos - static_cast<double>(lo);
    return v[lo] + f * (v[hi] - v[lo]);
}

ExperimentResult run_experiment(const ExperimentConfig &cfg)
{
    const auto t0 = std::chrono::steady_clock::now();
    const Simulator sim(cfg);
    ExperimentResult res;
    res.drops.resize(static_cast<std::size_t>(cfg.n_drops));
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (int d = next++; d < cfg.n_drops; d = next++)
        {
            try
            {
                res.drops[static_cast<std::size_t>(d)] = sim.run_drop(d);
            }
            catch (...)
            {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
            }
        }
    };
    if (cfg.threads <= 1)
    {
        worker();
    }
    else
    {
        std::vector<std::thread> pool;
        for (int i = 0; i < cfg.threads; ++i)
            pool.emplace_back(worker);
        for (auto &t : pool)
            t.join();
    }
    if (error)
        std::rethrow_exception(error);

    ResultSummary &s = res.summary;
    s.n_drops = cfg.n_drops;
    std::vector<double> errors, inside, outside, g_in, g_out;
    for (const auto &d : res.drops)
    {
        if (!d.fix)
        {
            ++s.n_failed;
        }
        else
        {
            if (d.fix->converged)
                ++s.n_converged;
            errors.push_back(d.horizontal_error());
            (d.in_hull ? inside : outside).push_back(d.horizontal_error());
        }
        if (std::isfinite(d.gdop))
            (d.in_hull ? g_in : g_out).push_back(d.gdop);
        (d.in_hull ? s.n_inside : s.n_outside) += 1;
    }
    for (int p : {50, 67, 90, 95})
        s.percentiles[p] = percentile(errors, p);
    if (cfg.hull_split)
    {
        auto mean = [](const std::vector<double> &v) -> std::optional<double> {
            if (v.empty())
                return std::nullopt;
            double a = 0.0;
            for (double x : v)
                a += x;
            return a / static_cast<double>(v.size());
        };
        if (!inside.empty())
            s.median_inside = percentile(inside, 50);
        if (!outside.empty())
            s.median_outside = percentile(outside, 50);
        s.mean_gdop_inside = mean(g_in);
        s.mean_gdop_outside = mean(g_out);
    }
    s.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

namespace
{

std::string num(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

json opt_json(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

} // namespace

std::string results_csv(const ExperimentResult &r)
{
    std::ostringstream os;
    os << "ue_id,true_x,true_y,true_z,est_x,est_y,est_z,horizontal_error,vertical_error,converged,in_hull,gdop\n";
    for (const auto &d : r.drops)
    {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        const Vec3 est = d.fix ? d.fix->position : Vec3(nan, nan, nan);
        os << d.ue_id << ',' << num(d.truth.x()) << ',' << num(d.truth.y()) << ',' << num(d.truth.z()) << ','
           << num(est.x()) << ',' << num(est.y()) << ',' << num(est.z()) << ',' << num(d.horizontal_error()) << ','
           << num(d.vertical_error()) << ',' << (d.fix && d.fix->converged ? 1 : 0) << ',' << (d.in_hull ? 1 : 0)
           << ',' << num(d.gdop) << '\n';
    }
    return os.str();
}

std::string cdf_csv(const ExperimentResult &r)
{
    std::vector<double> e;
    for (const auto &d : r.drops)
        if (d.fix)
            e.push_back(d.horizontal_error());
    std::sort(e.begin(), e.end());
    std::ostringstream os;
    os << "error_m,probability\n";
    for (std::size_t i = 0; i < e.size(); ++i)
        os << num(e[i]) << ',' << num(static_cast<double>(i + 1) / static_cast<double>(e.size())) << '\n';
    return os.str();
}

json summary_json(const ExperimentResult &r, const ExperimentConfig &cfg)
{
    const ResultSummary &s = r.summary;
    json p;
    for (const auto &[k, v] : s.percentiles)
        p["p" + std::to_string(k)] = std::isfinite(v) ? json(v) : json(nullptr);
    json j;
    j["schema_version"] = config_schema_version;
    j["preset"] = cfg.preset;
    j["scenario"] = to_string(cfg.scenario);
    j["frequency_range"] = to_string(cfg.fr);
    j["method"] = to_string(cfg.method);
    j["n_drops"] = s.n_drops;
    j["seed"] = cfg.seed;
    j["interference"] = cfg.interference;
    j["percentiles_m"] = p;
    j["n_converged"] = s.n_converged;
    j["n_failed"] = s.n_failed;
    j["runtime_s"] = s.runtime_s;
    if (cfg.hull_split)
        j["hull"] = {{"n_inside", s.n_inside},
                     {"n_outside", s.n_outside},
                     {"median_inside_m", opt_json(s.median_inside)},
                     {"median_outside_m", opt_json(s.median_outside)},
                     {"mean_gdop_inside", opt_json(s.mean_gdop_inside)},
                     {"mean_gdop_outside", opt_json(s.mean_gdop_outside)}};
    return j;
}

void write_artifacts(const ExperimentResult &r, const ExperimentConfig &cfg, const std::filesystem::path &out_dir)
{
    std::filesystem::create_directories(out_dir);
    auto write = [&](const char *name, const std::string &text) {
        std::ofstream f(out_dir / name, std::ios::binary);
        if (!f)
            throw std::runtime_error(std::string("cannot write ") + (out_dir / name).string());
        f << text;
    };
    write("results.csv", results_csv(r));
    write("cdf.csv", cdf_csv(r));
    write("summary.json", summary_json(r, cfg).dump(2) + "\n");
    std::ostringstream recs;
    for (const auto &d : r.drops)
        write_jsonl(recs, d.records);
    write("measurements.jsonl", recs.str());
}

json compare_runs(const json &a, const json &b)
{
    json out;
    json mismatch = json::array();
    for (const char *key : {"n_drops", "seed"})
        if (a.value(key, json()) != b.value(key, json()))
            mismatch.push_back(key);
    out["comparable"] = mismatch.empty();
    out["mismatched"] = mismatch;
    json deltas;
    const json &pa = a.at("percentiles_m");
    const json &pb = b.at("percentiles_m");
    for (const auto &[key, va] : pa.items())
    {
        if (!pb.contains(key) || va.is_null() || pb.at(key).is_null())
        {
            deltas[key] = nullptr;
            continue;
        }
        const double d = pb.at(key).get<double>() - va.get<double>();
        deltas[key] = {{"delta_m", d}, {"sign", d > 0 ? "+" : (d < 0 ? "-" : "0")}};
    }
    out["deltas"] = deltas;
    return out;
}

} // namespace nrpos
