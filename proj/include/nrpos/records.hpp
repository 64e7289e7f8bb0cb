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

#include "nrpos/common.hpp"
#include "nrpos/measurements.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nrpos
{

enum class MeasurementKind
{
    rstd,
    ue_rxtx,
    gnb_rxtx,
    ul_rtoa,
    prs_rsrp,
    srs_rsrp,
    aoa,
};

std::string to_string(MeasurementKind k);
MeasurementKind measurement_kind_from_string(const std::string &s);

// One reported measurement. The quantised payload is what solvers consume;
// raw values are kept for debugging only.
struct MeasurementRecord
{
    MeasurementKind kind = MeasurementKind::rstd;
    int ue_id = 0;
    int trp_id = 0;
    std::optional<int> reference_trp_id;  // RSTD and UL-RTOA differences
    std::optional<int> resource_id;       // beam id
    std::optional<TimingReport> timing;
    std::optional<PowerReport> power;
    std::optional<Angles> angles;         // AoA, or beam direction for PRS-RSRP
    double raw = 0.0;                     // seconds or dBm
    std::optional<Angles> raw_angles;

    // Throws when the payload does not fit the kind.
    void validate() const;
    bool operator==(const MeasurementRecord &) const;
};

void to_json(nlohmann::ordered_json &j, const MeasurementRecord &r);
void from_json(const nlohmann::ordered_json &j, MeasurementRecord &r);

// One record per line.
void write_jsonl(std::ostream &os, const std::vector<MeasurementRecord> &records);
std::vector<MeasurementRecord> read_jsonl(std::istream &is);

} // namespace nrpos
