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

#include "nrpos/channel.hpp"
#include "nrpos/prs.hpp"
#include "nrpos/scenario.hpp"
#include "nrpos/solvers.hpp"
#include "nrpos/srs.hpp"

#include <json.hpp>

#include <initializer_list>
#include <string>

namespace nrpos
{

using json = nlohmann::ordered_json;

// Version of the configuration document layout. Documents carrying a
// different "schema_version" are rejected.
constexpr int config_schema_version = 1;

// Thrown for schema problems; what() names the offending path.
class ConfigError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

// Rejects keys outside `allowed`.
void check_keys(const json &j, std::initializer_list<const char *> allowed, const std::string &path);
void check_schema_version(const json &j);

json encode(const DlPrsResource &r);
json encode(const DlPrsResourceSet &s);
json encode(const PrsConfigTree &t);
json encode(const SrsPosResource &r);
json encode(const AntennaArray &a);
json encode(const Deployment &d);
json encode(const ChannelParams &p);
json encode(const SolverOptions &o);

DlPrsResource decode_prs_resource(const json &j, const std::string &path = "resource");
DlPrsResourceSet decode_prs_resource_set(const json &j, const std::string &path = "set");
PrsConfigTree decode_prs_tree(const json &j, const std::string &path = "prs");
SrsPosResource decode_srs_resource(const json &j, const std::string &path = "srs");
AntennaArray decode_antenna_array(const json &j, AntennaArray base = {}, const std::string &path = "array");
Deployment decode_deployment(const json &j, const std::string &path = "deployment");
// Fields present in j override `base`.
ChannelParams decode_channel_params(const json &j, ChannelParams base, const std::string &path = "channel");
SolverOptions decode_solver_options(const json &j, SolverOptions base, const std::string &path = "solver");

} // namespace nrpos
