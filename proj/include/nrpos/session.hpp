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

// Location-protocol procedure flows as message-passing state machines.
//
// An LMF, a set of gNBs (one per TRP) and UEs exchange JSON-bodied messages
// over a discrete-event transport with fixed per-hop latency. Every message,
// abort, protocol error and fix lands in an append-only trace that can be
// replayed through the solvers offline.
#pragma once

#include "nrpos/config_io.hpp"
#include "nrpos/prs.hpp"
#include "nrpos/records.hpp"
#include "nrpos/solvers.hpp"
#include "nrpos/srs.hpp"

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace nrpos
{

enum class MessageKind
{
    lpp_request_capabilities,
    lpp_provide_capabilities,
    lpp_request_assistance_data,
    lpp_provide_assistance_data,
    lpp_request_location_information,
    lpp_provide_location_information,
    nrppa_positioning_information_request,
    nrppa_positioning_information_response,
    nrppa_measurement_request,
    nrppa_measurement_response,
    rrc_srs_config,
};

std::string to_string(MessageKind k);  // e.g. "LppRequestCapabilities"
MessageKind message_kind_from_string(const std::string &s);

enum class Role
{
    lmf,
    gnb,
    ue
};

struct NodeId
{
    Role role = Role::lmf;
    int id = 0;

    std::string str() const;  // "lmf", "gnb:3", "ue:7"
    static NodeId parse(const std::string &s);
    auto operator<=>(const NodeId &) const = default;
};

inline NodeId lmf_node() { return {Role::lmf, 0}; }
inline NodeId gnb_node(int id) { return {Role::gnb, id}; }
inline NodeId ue_node(int id) { return {Role::ue, id}; }

// LPP only between UE and LMF, NRPPa only between gNB and LMF, RRC SRS
// configuration only gNB to UE; request/provide directions are fixed too.
bool route_allowed(MessageKind kind, const NodeId &from, const NodeId &to);

struct Message
{
    MessageKind kind = MessageKind::lpp_request_capabilities;
    NodeId from;
    NodeId to;
    json payload = json::object();
    double timestamp = 0.0;  // send time, s
};

json to_json(const Message &m);
Message message_from_json(const json &j);

struct SessionConfig
{
    double hop_latency_s = 1e-3;
    double timeout_s = 1.0;
};

// Measurement providers. The UE hook returns the records for its
// ProvideLocationInformation; the gNB hook returns one TRP's records.
struct SessionHooks
{
    std::function<std::vector<MeasurementRecord>(int ue_id, Method method)> ue_measure;
    std::function<std::vector<MeasurementRecord>(int trp_id, int ue_id)> gnb_measure;
};

class SessionTimeout : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

enum class UeStage
{
    idle,
    srs_configured,
    assisted,
    reported
};

enum class LmfStage
{
    idle,
    await_capabilities,
    await_positioning_information,
    await_location_information,
    await_measurements,
    done,
    aborted
};

struct UeNodeState
{
    bool responsive = true;
    int serving_gnb = 0;
    UeStage stage = UeStage::idle;
    std::optional<json> srs;          // from RrcSrsConfig
    std::optional<json> assistance;   // last ProvideAssistanceData body
    bool operator==(const UeNodeState &) const = default;
};

struct GnbNodeState
{
    std::map<int, json> configured;   // ue id -> SRS configuration sent
    std::set<int> measured;           // ue ids reported on
    bool operator==(const GnbNodeState &) const = default;
};

struct LmfSession
{
    Method method = Method::multi_rtt;
    LmfStage stage = LmfStage::idle;
    int generation = 0;               // bumps on every wait; stale timers are ignored
    std::optional<json> srs;
    std::set<int> pending_gnbs;
    json ue_records = json::array();
    json gnb_records = json::array();
    bool operator==(const LmfSession &) const = default;
};

struct SessionResult
{
    std::map<int, PositionFix> fixes;
    std::map<int, std::string> aborted;  // ue id -> reason
    std::vector<json> trace;             // entries produced by this run
    std::string trace_jsonl() const;
};

struct NetworkSetup
{
    AnchorMap anchors;                // TRP id -> position, one gNB per TRP
    PrsConfigTree prs;
    SrsPosResource srs;
    SolverOptions solver;
    RecordPayload payload = RecordPayload::quantized;
    SessionConfig session;
};

class PositioningNetwork
{
public:
    explicit PositioningNetwork(NetworkSetup setup);

    void add_ue(int ue_id, int serving_gnb, bool responsive = true);
    void set_hooks(SessionHooks hooks) { hooks_ = std::move(hooks); }

    // Start one session per registered UE at the current time and run the
    // event loop to completion.
    SessionResult run_multi_rtt();
    SessionResult run_dl_tdoa();

    // UE-initiated request/provide round trip. Returns the PRS tree body.
    json request_assistance_on_demand(int ue_id);

    // Send an arbitrary message (as if from msg.from) and drain the queue.
    // Illegal routes and malformed bodies become protocol_error entries.
    void inject(Message msg);

    const std::vector<json> &trace() const { return trace_; }
    const UeNodeState &ue_state(int ue_id) const { return ues_.at(ue_id); }
    const GnbNodeState &gnb_state(int trp_id) const { return gnbs_.at(trp_id); }
    const std::map<int, LmfSession> &lmf_sessions() const { return sessions_; }
    double now() const { return now_; }

private:
    struct Event
    {
        double time = 0.0;
        std::uint64_t seq = 0;
        bool timer = false;
        Message msg;
        int ue = 0;
        int generation = 0;
        bool operator>(const Event &o) const { return time != o.time ? time > o.time : seq > o.seq; }
    };

    SessionResult run(Method method);
    void send(MessageKind kind, const NodeId &from, const NodeId &to, json payload);
    void arm_timer(int ue);
    void drain();
    void deliver(const Message &m);
    void on_ue(const Message &m);
    void on_gnb(const Message &m);
    void on_lmf(const Message &m);
    void protocol_error(const Message &m, const std::string &reason);
    void abort_session(int ue, const std::string &reason);
    void finish_session(int ue);
    json assistance_body() const;

    NetworkSetup setup_;
    SessionHooks hooks_;
    std::map<int, UeNodeState> ues_;
    std::map<int, GnbNodeState> gnbs_;
    std::map<int, LmfSession> sessions_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;
    std::vector<json> trace_;
    std::size_t run_start_ = 0;
    std::map<int, PositionFix> fixes_;
    std::map<int, std::string> aborted_;
};

// Solve every completed session found in a trace from the reported records
// alone. Keys are UE ids with a fix entry.
std::map<int, PositionFix> replay_solve(const std::vector<json> &trace, const AnchorMap &anchors,
                                        const SolverOptions &opt, RecordPayload payload = RecordPayload::quantized);
std::vector<json> parse_trace(const std::string &jsonl);

} // namespace nrpos
