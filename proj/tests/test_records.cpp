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
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <sstream>

using namespace nrpos;

namespace
{

MeasurementRecord random_record(oracle::Gen &g)
{
    MeasurementRecord r;
    r.kind = static_cast<MeasurementKind>(g.integer(0, 6));
    r.ue_id = g.integer(0, 1000);
    r.trp_id = g.integer(0, 63);
    switch (r.kind)
    {
    case MeasurementKind::rstd:
    case MeasurementKind::ue_rxtx:
    case MeasurementKind::gnb_rxtx:
    case MeasurementKind::ul_rtoa:
        r.raw = g.uniform(-1e-5, 1e-5);
        r.timing = quantize_timing(r.raw, g.integer(2, 5), FrequencyRange::fr1);
        if (r.kind == MeasurementKind::rstd || g.coin())
            r.reference_trp_id = g.integer(0, 63);
        break;
    case MeasurementKind::prs_rsrp:
    case MeasurementKind::srs_rsrp:
        r.raw = g.uniform(-160, -20);
        r.power = quantize_power(r.raw);
        if (g.coin())
        {
            r.resource_id = g.integer(0, 63);
            r.angles = Angles{g.uniform(-180, 180), g.uniform(0, 180)};
        }
        break;
    case MeasurementKind::aoa:
        r.angles = Angles{g.uniform(-180, 180), g.uniform(0, 180)};
        r.raw_angles = Angles{g.uniform(-180, 180), g.uniform(0, 180)};
        break;
    }
    return r;
}

} // namespace

TEST_CASE("kind names", "[records]")
{
    for (const char *n : {"RSTD", "UE_RXTX", "GNB_RXTX", "UL_RTOA", "PRS_RSRP", "SRS_RSRP", "AOA"})
        CHECK(to_string(measurement_kind_from_string(n)) == n);
    CHECK_THROWS_AS(measurement_kind_from_string("TOA"), std::invalid_argument);
}

TEST_CASE("property: JSON lines round trip", "[records][property]")
{
    oracle::Gen g(71);
    std::vector<MeasurementRecord> recs;
    for (int i = 0; i < 500; ++i)
    {
        recs.push_back(random_record(g));
        CHECK_NOTHROW(recs.back().validate());
    }
    std::stringstream ss;
    write_jsonl(ss, recs);
    const auto back = read_jsonl(ss);
    REQUIRE(back.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i)
        CHECK(back[i] == recs[i]);
}

TEST_CASE("payload validation", "[records]")
{
    MeasurementRecord r;
    r.kind = MeasurementKind::rstd;
    r.timing = quantize_timing(1e-7, 2, FrequencyRange::fr1);
    CHECK_THROWS_AS(r.validate(), std::invalid_argument);  // no reference TRP
    r.reference_trp_id = 3;
    CHECK_NOTHROW(r.validate());
    r.timing->value_tc += 1;
    CHECK_THROWS_AS(r.validate(), std::invalid_argument);

    MeasurementRecord beam;
    beam.kind = MeasurementKind::prs_rsrp;
    beam.power = quantize_power(-90);
    beam.angles = Angles{10, 100};
    CHECK_THROWS_AS(beam.validate(), std::invalid_argument);  // beam report needs its resource id
    beam.resource_id = 4;
    CHECK_NOTHROW(beam.validate());

    std::stringstream bad(R"({"kind":"AOA","ue_id":1,"trp_id":2,"raw":0})");
    CHECK_THROWS(read_jsonl(bad));
}
