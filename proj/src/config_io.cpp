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

#include "nrpos/config_io.hpp"

#include <algorithm>

namespace nrpos
{

namespace
{

template <class T> T get(const json &j, const char *key, const std::string &path)
{
    if (!j.contains(key))
        throw ConfigError(path + "." + key + ": missing");
    try
    {
        return j.at(key).get<T>();
    }
    catch (const nlohmann::json::exception &)
    {
        throw ConfigError(path + "." + key + ": wrong type");
    }
}

template <class T> void get_opt(const json &j, const char *key, T &out, const std::string &path)
{
    if (j.contains(key))
        out = get<T>(j, key, path);
}

void require_object(const json &j, const std::string &path)
{
    if (!j.is_object())
        throw ConfigError(path + ": expected an object");
}

json vec(const Vec3 &v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 decode_vec3(const json &j, const std::string &path)
{
    if (!j.is_array() || j.size() != 3)
        throw ConfigError(path + ": expected [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::string to_string(RepetitionOrder o)
{
    return o == RepetitionOrder::repeat_before_sweep ? "repeat_before_sweep" : "sweep_before_repeat";
}

std::string to_string(DropRegion r) { return r == DropRegion::area ? "area" : "hex_coverage"; }

DropRegion drop_region_from_string(const std::string &s, const std::string &path)
{
    if (s == "area")
        return DropRegion::area;
    if (s == "hex_coverage")
        return DropRegion::hex_coverage;
    throw ConfigError(path + ": unknown drop region '" + s + "'");
}

std::string to_string(LosProbabilityModel::Kind k) { return k == LosProbabilityModel::Kind::urban ? "urban" : "office"; }

json encode(const PathLossCoefficients &c)
{
    return {{"intercept_db", c.intercept_db}, {"distance_coeff", c.distance_coeff}, {"frequency_coeff", c.frequency_coeff}};
}

PathLossCoefficients decode_path_loss(const json &j, PathLossCoefficients base, const std::string &path)
{
    require_object(j, path);
    check_keys(j, {"intercept_db", "distance_coeff", "frequency_coeff"}, path);
    get_opt(j, "intercept_db", base.intercept_db, path);
    get_opt(j, "distance_coeff", base.distance_coeff, path);
    get_opt(j, "frequency_coeff", base.frequency_coeff, path);
    return base;
}

} // namespace

void check_keys(const json &j, std::initializer_list<const char *> allowed, const std::string &path)
{
    for (const auto &[key, value] : j.items())
    {
        (void)value;
        const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char *a) { return key == a; });
        if (!ok)
            throw ConfigError(path + "." + key + ": unknown key");
    }
}

void check_schema_version(const json &j)
{
    if (!j.contains("schema_version"))
        throw ConfigError("schema_version: missing");
    if (!j.at("schema_version").is_number_integer() || j.at("schema_version").get<int>() != config_schema_version)
        throw ConfigError("schema_version: unsupported (expected " + std::to_string(config_schema_version) + ")");
}

json encode(const DlPrsResource &r)
{
    return {{"resource_id", r.resource_id}, {"seq_id", r.seq_id},           {"comb_size", r.comb_size},
            {"re_offset", r.re_offset},     {"first_symbol", r.first_symbol}, {"n_symbols", r.n_symbols},
            {"start_prb", r.start_prb},     {"n_prb", r.n_prb},             {"beam_azimuth_deg", r.beam_azimuth_deg},
            {"beam_zenith_deg", r.beam_zenith_deg}};
}

json encode(const DlPrsResourceSet &s)
{
    json res = json::array();
    for (const auto &r : s.resources)
        res.push_back(encode(r));
    return {{"set_id", s.set_id},
            {"period", s.period},
            {"period_unit", s.period_unit == PeriodUnit::ms ? "ms" : "slots"},
            {"gap_slots", s.gap_slots},
            {"repetitions", s.repetitions},
            {"muting_repetition", s.muting_repetition},
            {"muting_occasion", s.muting_occasion},
            {"order", to_string(s.order)},
            {"resources", res}};
}

json encode(const PrsConfigTree &t)
{
    json layers = json::array();
    for (const auto &l : t.layers)
    {
        json trps = json::array();
        for (const auto &trp : l.trps)
        {
            json sets = json::array();
            for (const auto &s : trp.sets)
                sets.push_back(encode(s));
            trps.push_back({{"trp_id", trp.trp_id}, {"sets", sets}});
        }
        layers.push_back({{"layer_id", l.layer_id}, {"trps", trps}});
    }
    return {{"layers", layers}};
}

json encode(const SrsPosResource &r)
{
    return {{"resource_id", r.resource_id},   {"comb_size", r.comb_size}, {"comb_offset", r.comb_offset},
            {"cyclic_shift", r.cyclic_shift}, {"n_symbols", r.n_symbols}, {"first_symbol", r.first_symbol},
            {"zc_root", r.zc_root},           {"start_prb", r.start_prb}, {"n_prb", r.n_prb}};
}

json encode(const AntennaArray &a)
{
    return {{"rows", a.rows},
            {"cols", a.cols},
            {"spacing_wavelengths", a.spacing_wavelengths},
            {"boresight_azimuth_deg", a.boresight_azimuth_deg},
            {"boresight_zenith_deg", a.boresight_zenith_deg}};
}

json encode(const Deployment &d)
{
    json trps = json::array();
    for (const auto &t : d.trps)
        trps.push_back({{"trp_id", t.trp_id},
                        {"site_id", t.site_id},
                        {"position", vec(t.position)},
                        {"sectorized", t.sectorized},
                        {"sector_azimuth_deg", t.sector_azimuth_deg},
                        {"tx_power_dbm", t.tx_power_dbm},
                        {"array", encode(t.array)},
                        {"comb_offset", t.comb_offset}});
    json sites = json::array();
    for (const auto &s : d.site_centers)
        sites.push_back(json::array({s.x(), s.y()}));
    return {{"scenario", to_string(d.scenario)},
            {"frequency_range", to_string(d.fr)},
            {"area", {{"x0", d.area.x0}, {"y0", d.area.y0}, {"width", d.area.width}, {"height", d.area.height}}},
            {"isd", d.isd},
            {"carrier_hz", d.carrier_hz},
            {"scs_khz", d.numerology.scs_khz},
            {"n_prb", d.numerology.n_prb},
            {"ue_height", d.ue_height},
            {"min_ue_distance", d.min_ue_distance},
            {"drop_region", to_string(d.drop_region)},
            {"site_centers", sites},
            {"trps", trps}};
}

json encode(const ChannelParams &p)
{
    return {{"los_model",
             {{"kind", to_string(p.los.kind)},
              {"d1", p.los.d1},
              {"decay1", p.los.decay1},
              {"d2", p.los.d2},
              {"scale2", p.los.scale2},
              {"decay2", p.los.decay2}}},
            {"path_loss_los", encode(p.path_loss_los)},
            {"path_loss_nlos", encode(p.path_loss_nlos)},
            {"shadow_sigma_los_db", p.shadow_sigma_los_db},
            {"shadow_sigma_nlos_db", p.shadow_sigma_nlos_db},
            {"n_taps", p.n_taps},
            {"rms_delay_spread_los_s", p.rms_delay_spread_los_s},
            {"rms_delay_spread_nlos_s", p.rms_delay_spread_nlos_s},
            {"k_factor_db", p.k_factor_db},
            {"nlos_excess_mean_s", p.nlos_excess_mean_s},
            {"nlos_angle_sigma_deg", p.nlos_angle_sigma_deg},
            {"tap_angle_spread_deg", p.tap_angle_spread_deg},
            {"sector_hpbw_deg", p.sector_hpbw_deg},
            {"sector_front_back_db", p.sector_front_back_db},
            {"ideal", p.ideal}};
}

json encode(const SolverOptions &o)
{
    json j = {{"max_iterations", o.max_iterations},
              {"tolerance_m", o.tolerance_m},
              {"fix_height", o.fix_height ? json(*o.fix_height) : json(nullptr)},
              {"nlos_rejection", o.nlos_rejection == NlosRejection::off ? "off" : "residual_trim"},
              {"multi_start", o.multi_start}};
    return j;
}

DlPrsResource decode_prs_resource(const json &j, const std::string &path)
{
    require_object(j, path);
    check_keys(j,
               {"resource_id", "seq_id", "comb_size", "re_offset", "first_symbol", "n_symbols", "start_prb", "n_prb",
                "beam_azimuth_deg", "beam_zenith_deg"},
               path);
    DlPrsResource r;
    r.resource_id = get<int>(j, "resource_id", path);
    r.seq_id = get<int>(j, "seq_id", path);
    r.comb_size = get<int>(j, "comb_size", path);
    r.re_offset = get<int>(j, "re_offset", path);
    get_opt(j, "first_symbol", r.first_symbol, path);
    r.n_symbols = get<int>(j, "n_symbols", path);
    get_opt(j, "start_prb", r.start_prb, path);
    r.n_prb = get<int>(j, "n_prb", path);
    get_opt(j, "beam_azimuth_deg", r.beam_azimuth_deg, path);
    get_opt(j, "beam_zenith_deg", r.beam_zenith_deg, path);
    try
    {
        r.validate();
    }
    catch (const std::invalid_argument &e)
    {
        throw ConfigError(path + ": " + e.what());
    }
    return r;
}

DlPrsResourceSet decode_prs_resource_set(const json &j, const std::string &path)
{
    require_object(j, path);
    check_keys(j,
               {"set_id", "period", "period_unit", "gap_slots", "repetitions", "muting_repetition", "muting_occasion",
                "order", "resources"},
               path);
    DlPrsResourceSet s;
    s.set_id = get<int>(j, "set_id", path);
    s.period = get<double>(j, "period", path);
    if (j.contains("period_unit"))
    {
        const auto u = get<std::string>(j, "period_unit", path);
        if (u == "ms")
            s.period_unit = PeriodUnit::ms;
        else if (u == "slots")
            s.period_unit = PeriodUnit::slots;
        else
            throw ConfigError(path + ".period_unit: expected 'ms' or 'slots'");
    }
    get_opt(j, "gap_slots", s.gap_slots, path);
    get_opt(j, "repetitions", s.repetitions, path);
    get_opt(j, "muting_repetition", s.muting_repetition, path);
    get_opt(j, "muting_occasion", s.muting_occasion, path);
    if (j.contains("order"))
    {
        const auto o = get<std::string>(j, "order", path);
        if (o == "repeat_before_sweep")
            s.order = RepetitionOrder::repeat_before_sweep;
        else if (o == "sweep_before_repeat")
            s.order = RepetitionOrder::sweep_before_repeat;
        else
            throw ConfigError(path + ".order: unknown repetition order '" + o + "'");
    }
    if (!j.contains("resources") || !j.at("resources").is_array())
        throw ConfigError(path + ".resources: expected an array");
    for (std::size_t i = 0; i < j.at("resources").size(); ++i)
        s.resources.push_back(decode_prs_resource(j.at("resources")[i], path + ".resources[" + std::to_string(i) + "]"));
    try
    {
        s.validate();
    }
    catch (const std::invalid_argument &e)
    {
        throw ConfigError(path + ": " + e.what());
    }
    return s;
}

PrsConfigTree decode_prs_tree(const json &j, const std::string &path)
{
    require_object(j, path);
    check_keys(j, {"layers"}, path);
    PrsConfigTree t;
    const json &layers = j.at("layers");
    if (!layers.is_array())
        throw ConfigError(path + ".layers: expected an array");
    for (std::size_t li = 0; li < layers.size(); ++li)
    {
        const std::string lp = path + ".layers[" + std::to_string(li) + "]";
        const json &lj = layers[li];
        require_object(lj, lp);
        check_keys(lj, {"layer_id", "trps"}, lp);
        FrequencyLayer layer;
        layer.layer_id = get<int>(lj, "layer_id", lp);
        for (std::size_t ti = 0; ti < lj.at("trps").size(); ++ti)
        {
            const std::string tp = lp + ".trps[" + std::to_string(ti) + "]";
            const json &tj = lj.at("trps")[ti];
            require_object(tj, tp);
            check_keys(tj, {"trp_id", "sets"}, tp);
            TrpPrsConfig trp;
            trp.trp_id = get<int>(tj, "trp_id", tp);
            for (std::size_t si = 0; si < tj.at("sets").size(); ++si)
                trp.sets.push_back(decode_prs_resource_set(tj.at("sets")[si], tp + ".sets[" + std::to_string(si) + "]"));
            layer.trps.push_back(std::move(trp));
        }
        t.layers.push_back(std::move(layer));
    }
    try
    {
        t.validate();
    }
    catch (const std::invalid_argument &e)
    {
        throw ConfigError(path + ": " + e.what());
    }
    return t;
}

SrsPosResource decode_srs_resource(const json &j, const std::string &path)
{
    require_object(j, path);
    check_keys(j,
               {"resource_id", "comb_size", "comb_offset", "cyclic_shift", "n_symbols", "first_symbol", "zc_root",
                "start_prb", "n_prb"},
               path);
    SrsPosResource r;
    get_opt(j, "resource_id", r.resource_id, path);
    get_opt(j, "comb_size", r.comb_size, path);
    get_opt(j, "comb_offset", r.comb_offset, path);
    get_opt(j, "cyclic_shift", r.cyclic_shift, path);
    get_opt(j, "n_symbols", r.n_symbols, path);
    get_opt(j, "first_symbol", r.first_symbol, path);
    get_opt(j, "zc_root", r.zc_root, path);
    get_opt(j, "start_prb", r.start_prb, path);
    get_opt(j, "n_prb", r.n_prb, path);
    try
    {
        r.validate();
    }
    catch (const std::invalid_argument &e)
    {
        throw ConfigError(path + ": " + e.what());
    }
    return r;
}

AntennaArray decode_antenna_array(const json &j, AntennaArray a, const std::string &path)
{
    require_object(j, path);
    check_keys(j, {"rows", "cols", "spacing_wavelengths", "boresight_azimuth_deg", "boresight_zenith_deg"}, path);
    get_opt(j, "rows", a.rows, path);
    get_opt(j, "cols", a.cols, path);
    get_opt(j, "spacing_wavelengths", a.spacing_wavelengths, path);
    get_opt(j, "boresight_azimuth_deg", a.boresight_azimuth_deg, path);
    get_opt(j, "boresight_zenith_deg", a.boresight_zenith_deg, path);
    try
    {
        a.validate();
    }
    catch (const std::invalid_argument &e)
    {
        throw ConfigError(path + ": " + e.what());
    }
    return a;
}

Deployment decode_deployment(const json &j, const std::string &path)
{
    require_object(j, path);
    check_keys(j,
               {"scenario", "frequency_range", "area", "isd", "carrier_hz", "scs_khz", "n_prb", "ue_height",
                "min_ue_distance", "drop_region", "site_centers", "trps"},
               path);
    Deployment d;
    try
    {
        d.scenario = scenario_from_string(get<std::string>(j, "scenario", path));
        d.fr = frequency_range_from_string(get<std::string>(j, "frequency_range", path));
    }
    catch (const ConfigError &)
    {
        throw;
    }
    catch (const std::invalid_argument &e)
    {
        throw ConfigError(path + ": " + e.what());
    }
    const json &area = j.at("area");
    check_keys(area, {"x0", "y0", "width", "height"}, path + ".area");
    d.area = {get<double>(area, "x0", path + ".area"), get<double>(area, "y0", path + ".area"),
              get<double>(area, "width", path + ".area"), get<double>(area, "height", path + ".area")};
    d.isd = get<double>(j, "isd", path);
    d.carrier_hz = get<double>(j, "carrier_hz", path);
    d.numerology = Numerology::make(get<int>(j, "scs_khz", path), get<int>(j, "n_prb", path));
    get_opt(j, "ue_height", d.ue_height, path);
    get_opt(j, "min_ue_distance", d.min_ue_distance, path);
    if (j.contains("drop_region"))
        d.drop_region = drop_region_from_string(get<std::string>(j, "drop_region", path), path + ".drop_region");
    if (j.contains("site_centers"))
        for (const auto &s : j.at("site_centers"))
            d.site_centers.emplace_back(s.at(0).get<double>(), s.at(1).get<double>());
    const json &trps = j.at("trps");
    for (std::size_t i = 0; i < trps.size(); ++i)
    {
        const std::string tp = path + ".trps[" + std::to_string(i) + "]";
        const json &tj = trps[i];
        check_keys(tj,
                   {"trp_id", "site_id", "position", "sectorized", "sector_azimuth_deg", "tx_power_dbm", "array",
                    "comb_offset"},
                   tp);
        Trp t;
        t.trp_id = get<int>(tj, "trp_id", tp);
        get_opt(tj, "site_id", t.site_id, tp);
        t.position = decode_vec3(tj.at("position"), tp + ".position");
        get_opt(tj, "sectorized", t.sectorized, tp);
        get_opt(tj, "sector_azimuth_deg", t.sector_azimuth_deg, tp);
        t.tx_power_dbm = get<double>(tj, "tx_power_dbm", tp);
        if (tj.contains("array"))
            t.array = decode_antenna_array(tj.at("array"), {}, tp + ".array");
        get_opt(tj, "comb_offset", t.comb_offset, tp);
        d.trps.push_back(t);
    }
    if (d.site_centers.empty())
        for (const auto &t : d.trps)
            d.site_centers.emplace_back(t.position.head<2>());
    try
    {
        d.validate();
    }
    catch (const std::invalid_argument &e)
    {
        throw ConfigError(path + ": " + e.what());
    }
    return d;
}

ChannelParams decode_channel_params(const json &j, ChannelParams p, const std::string &path)
{
    require_object(j, path);
    check_keys(j,
               {"los_model", "path_loss_los", "path_loss_nlos", "shadow_sigma_los_db", "shadow_sigma_nlos_db", "n_taps",
                "rms_delay_spread_los_s", "rms_delay_spread_nlos_s", "k_factor_db", "nlos_excess_mean_s",
                "nlos_angle_sigma_deg", "tap_angle_spread_deg", "sector_hpbw_deg", "sector_front_back_db", "ideal"},
               path);
    if (j.contains("los_model"))
    {
        const json &l = j.at("los_model");
        const std::string lp = path + ".los_model";
        check_keys(l, {"kind", "d1", "decay1", "d2", "scale2", "decay2"}, lp);
        if (l.contains("kind"))
        {
            const auto k = get<std::string>(l, "kind", lp);
            if (k == "urban")
                p.los.kind = LosProbabilityModel::Kind::urban;
            else if (k == "office")
                p.los.kind = LosProbabilityModel::Kind::office;
            else
                throw ConfigError(lp + ".kind: expected 'urban' or 'office'");
        }
        get_opt(l, "d1", p.los.d1, lp);
        get_opt(l, "decay1", p.los.decay1, lp);
        get_opt(l, "d2", p.los.d2, lp);
        get_opt(l, "scale2", p.los.scale2, lp);
        get_opt(l, "decay2", p.los.decay2, lp);
    }
    if (j.contains("path_loss_los"))
        p.path_loss_los = decode_path_loss(j.at("path_loss_los"), p.path_loss_los, path + ".path_loss_los");
    if (j.contains("path_loss_nlos"))
        p.path_loss_nlos = decode_path_loss(j.at("path_loss_nlos"), p.path_loss_nlos, path + ".path_loss_nlos");
    get_opt(j, "shadow_sigma_los_db", p.shadow_sigma_los_db, path);
    get_opt(j, "shadow_sigma_nlos_db", p.shadow_sigma_nlos_db, path);
    get_opt(j, "n_taps", p.n_taps, path);
    get_opt(j, "rms_delay_spread_los_s", p.rms_delay_spread_los_s, path);
    get_opt(j, "rms_delay_spread_nlos_s", p.rms_delay_spread_nlos_s, path);
    get_opt(j, "k_factor_db", p.k_factor_db, path);
    get_opt(j, "nlos_excess_mean_s", p.nlos_excess_mean_s, path);
    get_opt(j, "nlos_angle_sigma_deg", p.nlos_angle_sigma_deg, path);
    get_opt(j, "tap_angle_spread_deg", p.tap_angle_spread_deg, path);
    get_opt(j, "sector_hpbw_deg", p.sector_hpbw_deg, path);
    get_opt(j, "sector_front_back_db", p.sector_front_back_db, path);
    get_opt(j, "ideal", p.ideal, path);
    try
    {
        p.validate();
    }
    catch (const std::invalid_argument &e)
    {
        throw ConfigError(path + ": " + e.what());
    }
    return p;
}

SolverOptions decode_solver_options(const json &j, SolverOptions o, const std::string &path)
{
    require_object(j, path);
    check_keys(j, {"max_iterations", "tolerance_m", "fix_height", "nlos_rejection", "multi_start"}, path);
    get_opt(j, "max_iterations", o.max_iterations, path);
    get_opt(j, "tolerance_m", o.tolerance_m, path);
    if (j.contains("fix_height"))
    {
        if (j.at("fix_height").is_null())
            o.fix_height.reset();
        else
            o.fix_height = get<double>(j, "fix_height", path);
    }
    if (j.contains("nlos_rejection"))
    {
        const auto s = get<std::string>(j, "nlos_rejection", path);
        if (s == "off")
            o.nlos_rejection = NlosRejection::off;
        else if (s == "residual_trim")
            o.nlos_rejection = NlosRejection::residual_trim;
        else
            throw ConfigError(path + ".nlos_rejection: expected 'off' or 'residual_trim'");
    }
    get_opt(j, "multi_start", o.multi_start, path);
    try
    {
        o.validate();
    }
    catch (const std::invalid_argument &e)
    {
        throw ConfigError(path + ": " + e.what());
    }
    return o;
}

} // namespace nrpos
