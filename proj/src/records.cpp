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

#include "nrpos/records.hpp"

#include <array>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <utility>

namespace nrpos
{

namespace
{

constexpr std::array<std::pair<MeasurementKind, const char *>, 7> kind_names{{
    {MeasurementKind::rstd, "RSTD"},
    {MeasurementKind::ue_rxtx, "UE_RXTX"},
    {MeasurementKind::gnb_rxtx, "GNB_RXTX"},
    {MeasurementKind::ul_rtoa, "UL_RTOA"},
    {MeasurementKind::prs_rsrp, "PRS_RSRP"},
    {MeasurementKind::srs_rsrp, "SRS_RSRP"},
    {MeasurementKind::aoa, "AOA"},
}};

bool is_timing(MeasurementKind k)
{
    return k == MeasurementKind::rstd || k == MeasurementKind::ue_rxtx || k == MeasurementKind::gnb_rxtx ||
           k == MeasurementKind::ul_rtoa;
}

bool is_power(MeasurementKind k) { return k == MeasurementKind::prs_rsrp || k == MeasurementKind::srs_rsrp; }

} // namespace

std::string to_string(MeasurementKind k)
{
    for (const auto &[kind, name] : kind_names)
        if (kind == k)
            return name;
    throw std::invalid_argument("unknown measurement kind");
}

MeasurementKind measurement_kind_from_string(const std::string &s)
{
    for (const auto &[kind, name] : kind_names)
        if (s == name)
            return kind;
    throw std::invalid_argument("unknown measurement kind: " + s);
}

void MeasurementRecord::validate() const
{
    if (is_timing(kind))
    {
        if (!timing)
            throw std::invalid_argument("MeasurementRecord: timing payload missing");
        timing->validate();
    }
    if (is_power(kind) && !power)
        throw std::invalid_argument("MeasurementRecord: power payload missing");
    if (kind == MeasurementKind::aoa && !angles)
        throw std::invalid_argument("MeasurementRecord: angle payload missing");
    if (kind == MeasurementKind::rstd && !reference_trp_id)
        throw std::invalid_argument("MeasurementRecord: RSTD without reference TRP");
    if (kind == MeasurementKind::prs_rsrp && angles && !resource_id)
        throw std::invalid_argument("MeasurementRecord: beam report without resource id");
}

bool MeasurementRecord::operator==(const MeasurementRecord &o) const
{
    auto same_angles = [](const std::optional<Angles> &a, const std::optional<Angles> &b) {
        if (a.has_value() != b.has_value())
            return false;
        return !a || (a->azimuth_deg == b->azimuth_deg && a->zenith_deg == b->zenith_deg);
    };
    auto same_timing = [](const std::optional<TimingReport> &a, const std::optional<TimingReport> &b) {
        if (a.has_value() != b.has_value())
            return false;
        return !a || (a->value_tc == b->value_tc && a->k == b->k && a->fr == b->fr && a->clamped == b->clamped);
    };
    auto same_power = [](const std::optional<PowerReport> &a, const std::optional<PowerReport> &b) {
        if (a.has_value() != b.has_value())
            return false;
        return !a || (a->value_dbm == b->value_dbm && a->clamped == b->clamped);
    };
    return kind == o.kind && ue_id == o.ue_id && trp_id == o.trp_id && reference_trp_id == o.reference_trp_id &&
           resource_id == o.resource_id && same_timing(timing, o.timing) && same_power(power, o.power) &&
           same_angles(angles, o.angles) && raw == o.raw && same_angles(raw_angles, o.raw_angles);
}

void to_json(nlohmann::ordered_json &j, const MeasurementRecord &r)
{
    j = nlohmann::ordered_json::object();
    j["kind"] = to_string(r.kind);
    j["ue_id"] = r.ue_id;
    j["trp_id"] = r.trp_id;
    if (r.reference_trp_id)
        j["reference_trp_id"] = *r.reference_trp_id;
    if (r.resource_id)
        j["resource_id"] = *r.resource_id;
    if (r.timing)
        j["timing"] = {{"value_tc", r.timing->value_tc},
                       {"k", r.timing->k},
                       {"fr", to_string(r.timing->fr)},
                       {"clamped", r.timing->clamped}};
    if (r.power)
        j["power"] = {{"value_dbm", r.power->value_dbm}, {"clamped", r.power->clamped}};
    if (r.angles)
        j["angles"] = {{"azimuth_deg", r.angles->azimuth_deg}, {"zenith_deg", r.angles->zenith_deg}};
    j["raw"] = r.raw;
    if (r.raw_angles)
        j["raw_angles"] = {{"azimuth_deg", r.raw_angles->azimuth_deg}, {"zenith_deg", r.raw_angles->zenith_deg}};
}

void from_json(const nlohmann::ordered_json &j, MeasurementRecord &r)
{
    r = MeasurementRecord{};
    r.kind = measurement_kind_from_string(j.at("kind").get<std::string>());
    r.ue_id = j.at("ue_id").get<int>();
    r.trp_id = j.at("trp_id").get<int>();
    if (j.contains("reference_trp_id"))
        r.reference_trp_id = j.at("reference_trp_id").get<int>();
    if (j.contains("resource_id"))
        r.resource_id = j.at("resource_id").get<int>();
    if (j.contains("timing"))
    {
        const auto &t = j.at("timing");
        TimingReport tr;
        tr.value_tc = t.at("value_tc").get<std::int64_t>();
        tr.k = t.at("k").get<int>();
        tr.fr = frequency_range_from_string(t.at("fr").get<std::string>());
        tr.clamped = t.value("clamped", false);
        r.timing = tr;
    }
    if (j.contains("power"))
        r.power = PowerReport{j.at("power").at("value_dbm").get<int>(), j.at("power").value("clamped", false)};
    auto angles = [&](const char *key) -> std::optional<Angles> {
        if (!j.contains(key))
            return std::nullopt;
        return Angles{j.at(key).at("azimuth_deg").get<double>(), j.at(key).at("zenith_deg").get<double>()};
    };
    r.angles = angles("angles");
    r.raw = j.value("raw", 0.0);
    r.raw_angles = angles("raw_angles");
    r.validate();
}

void write_jsonl(std::ostream &os, const std::vector<MeasurementRecord> &records)
{
    for (const auto &r : records)
        os << nlohmann::ordered_json(r).dump() << '\n';
}

std::vector<MeasurementRecord> read_jsonl(std::istream &is)
{
    std::vector<MeasurementRecord> out;
    std::string line;
    while (std::getline(is, line))
    {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        out.push_back(nlohmann::ordered_json::parse(line).get<MeasurementRecord>());
    }
    return out;
}

} // namespace nrpos
