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

#include "nrpos/session.hpp"

#include <algorithm>
#include <array>
#include <sstream>
#include <utility>

namespace nrpos
{

namespace
{

struct KindInfo
{
    MessageKind kind;
    const char *name;
    Role from;
    Role to;
};

constexpr std::array<KindInfo, 11> kinds{{
    {MessageKind::lpp_request_capabilities, "LppRequestCapabilities", Role::lmf, Role::ue},
    {MessageKind::lpp_provide_capabilities, "LppProvideCapabilities", Role::ue, Role::lmf},
    {MessageKind::lpp_request_assistance_data, "LppRequestAssistanceData", Role::ue, Role::lmf},
    {MessageKind::lpp_provide_assistance_data, "LppProvideAssistanceData", Role::lmf, Role::ue},
    {MessageKind::lpp_request_location_information, "LppRequestLocationInformation", Role::lmf, Role::ue},
    {MessageKind::lpp_provide_location_information, "LppProvideLocationInformation", Role::ue, Role::lmf},
    {MessageKind::nrppa_positioning_information_request, "NrppaPositioningInformationRequest", Role::lmf, Role::gnb},
    {MessageKind::nrppa_positioning_information_response, "NrppaPositioningInformationResponse", Role::gnb, Role::lmf},
    {MessageKind::nrppa_measurement_request, "NrppaMeasurementRequest", Role::lmf, Role::gnb},
    {MessageKind::nrppa_measurement_response, "NrppaMeasurementResponse", Role::gnb, Role::lmf},
    {MessageKind::rrc_srs_config, "RrcSrsConfig", Role::gnb, Role::ue},
}};

const KindInfo &info(MessageKind k)
{
    for (const auto &i : kinds)
        if (i.kind == k)
            return i;
    throw std::invalid_argument("unknown message kind");
}

int body_int(const json &body, const char *key)
{
    if (!body.is_object() || !body.contains(key) || !body.at(key).is_number_integer())
        throw std::invalid_argument(std::string("body field '") + key + "' missing or not an integer");
    return body.at(key).get<int>();
}

const json &body_array(const json &body, const char *key)
{
    if (!body.is_object() || !body.contains(key) || !body.at(key).is_array())
        throw std::invalid_argument(std::string("body field '") + key + "' missing or not an array");
    return body.at(key);
}

std::vector<MeasurementRecord> decode_records(const json &arr)
{
    std::vector<MeasurementRecord> out;
    for (const auto &j : arr)
    {
        MeasurementRecord r;
        from_json(j, r);
        r.validate();
        out.push_back(std::move(r));
    }
    return out;
}

// Both the live LMF and the replay path go through here, so the solver sees
// the same records in the same order.
PositionFix solve_reported(Method method, const AnchorMap &anchors, const json &ue_records, const json &gnb_records,
                           const SolverOptions &opt, RecordPayload payload)
{
    std::vector<MeasurementRecord> recs = decode_records(ue_records);
    for (auto &r : decode_records(gnb_records))
        recs.push_back(std::move(r));
    std::stable_sort(recs.begin(), recs.end(), [](const MeasurementRecord &a, const MeasurementRecord &b) {
        return std::tie(a.kind, a.trp_id) < std::tie(b.kind, b.trp_id);
    });
    return solve_records(method, anchors, recs, opt, payload);
}

json fix_entry(double t, int ue, const PositionFix &fix)
{
    return {{"type", "fix"},
            {"t", t},
            {"ue", ue},
            {"method", to_string(fix.method)},
            {"position", {fix.position.x(), fix.position.y(), fix.position.z()}},
            {"converged", fix.converged},
            {"residual_rms", fix.residual_rms},
            {"iterations", fix.iterations}};
}

} // namespace

std::string to_string(MessageKind k) { return info(k).name; }

MessageKind message_kind_from_string(const std::string &s)
{
    for (const auto &i : kinds)
        if (s == i.name)
            return i.kind;
    throw std::invalid_argument("unknown message kind '" + s + "'");
}

std::string NodeId::str() const
{
    switch (role)
    {
    case Role::lmf:
        return "lmf";
    case Role::gnb:
        return "gnb:" + std::to_string(id);
    case Role::ue:
        return "ue:" + std::to_string(id);
    }
    return "?";
}

NodeId NodeId::parse(const std::string &s)
{
    if (s == "lmf")
        return lmf_node();
    const auto colon = s.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("bad node id '" + s + "'");
    const std::string role = s.substr(0, colon);
    std::size_t used = 0;
    const int id = std::stoi(s.substr(colon + 1), &used);
    if (used != s.size() - colon - 1)
        throw std::invalid_argument("bad node id '" + s + "'");
    if (role == "gnb")
        return gnb_node(id);
    if (role == "ue")
        return ue_node(id);
    throw std::invalid_argument("bad node id '" + s + "'");
}

bool route_allowed(MessageKind kind, const NodeId &from, const NodeId &to)
{
    const KindInfo &i = info(kind);
    return from.role == i.from && to.role == i.to;
}

json to_json(const Message &m)
{
    return {{"kind", to_string(m.kind)},
            {"from", m.from.str()},
            {"to", m.to.str()},
            {"t", m.timestamp},
            {"payload", m.payload}};
}

Message message_from_json(const json &j)
{
    Message m;
    m.kind = message_kind_from_string(j.at("kind").get<std::string>());
    m.from = NodeId::parse(j.at("from").get<std::string>());
    m.to = NodeId::parse(j.at("to").get<std::string>());
    m.timestamp = j.at("t").get<double>();
    m.payload = j.at("payload");
    return m;
}

std::string SessionResult::trace_jsonl() const
{
    std::string out;
    for (const auto &e : trace)
        out += e.dump() + '\n';
    return out;
}

std::vector<json> parse_trace(const std::string &jsonl)
{
    std::vector<json> out;
    std::istringstream is(jsonl);
    std::string line;
    while (std::getline(is, line))
        if (!line.empty())
            out.push_back(json::parse(line));
    return out;
}

// ---- Network -------------------------------------------------------------

PositioningNetwork::PositioningNetwork(NetworkSetup setup) : setup_(std::move(setup))
{
    if (setup_.anchors.empty())
        throw std::invalid_argument("PositioningNetwork: no TRPs");
    if (!(setup_.session.hop_latency_s > 0.0) || !(setup_.session.timeout_s > setup_.session.hop_latency_s))
        throw std::invalid_argument("PositioningNetwork: need 0 < latency < timeout");
    setup_.prs.validate();
    setup_.srs.validate();
    for (const auto &[id, pos] : setup_.anchors)
        gnbs_[id] = {};
}

void PositioningNetwork::add_ue(int ue_id, int serving_gnb, bool responsive)
{
    if (!setup_.anchors.count(serving_gnb))
        throw std::invalid_argument("add_ue: unknown serving gNB");
    UeNodeState s;
    s.responsive = responsive;
    s.serving_gnb = serving_gnb;
    ues_[ue_id] = s;
}

json PositioningNetwork::assistance_body() const
{
    json trps = json::array();
    for (const auto &[id, p] : setup_.anchors)
        trps.push_back({{"trp_id", id}, {"position", {p.x(), p.y(), p.z()}}});
    return {{"prs", encode(setup_.prs)}, {"trps", trps}};
}

void PositioningNetwork::send(MessageKind kind, const NodeId &from, const NodeId &to, json payload)
{
    Message m{kind, from, to, std::move(payload), now_};
    if (!route_allowed(kind, from, to))
        throw std::logic_error("illegal route " + to_string(kind) + " " + from.str() + "->" + to.str());
    json entry = to_json(m);
    entry["type"] = "message";
    trace_.push_back(std::move(entry));
    Event e;
    e.time = now_ + setup_.session.hop_latency_s;
    e.seq = seq_++;
    e.msg = std::move(m);
    queue_.push(std::move(e));
}

void PositioningNetwork::arm_timer(int ue)
{
    LmfSession &s = sessions_.at(ue);
    ++s.generation;
    Event e;
    e.time = now_ + setup_.session.timeout_s;
    e.seq = seq_++;
    e.timer = true;
    e.ue = ue;
    e.generation = s.generation;
    queue_.push(std::move(e));
}

void PositioningNetwork::drain()
{
    while (!queue_.empty())
    {
        Event e = queue_.top();
        queue_.pop();
        now_ = e.time;
        if (e.timer)
        {
            auto it = sessions_.find(e.ue);
            if (it == sessions_.end() || it->second.generation != e.generation)
                continue;
            const LmfStage st = it->second.stage;
            if (st != LmfStage::done && st != LmfStage::aborted && st != LmfStage::idle)
                abort_session(e.ue, "timeout");
            continue;
        }
        deliver(e.msg);
    }
}

void PositioningNetwork::protocol_error(const Message &m, const std::string &reason)
{
    trace_.push_back({{"type", "protocol_error"},
                      {"t", now_},
                      {"node", m.to.str()},
                      {"kind", to_string(m.kind)},
                      {"from", m.from.str()},
                      {"reason", reason}});
}

void PositioningNetwork::abort_session(int ue, const std::string &reason)
{
    sessions_.at(ue).stage = LmfStage::aborted;
    aborted_[ue] = reason;
    trace_.push_back({{"type", "abort"}, {"t", now_}, {"ue", ue}, {"reason", reason}});
}

void PositioningNetwork::deliver(const Message &m)
{
    // A rejected message must leave every node as it was.
    const auto ues = ues_;
    const auto gnbs = gnbs_;
    const auto sessions = sessions_;
    const auto trace_size = trace_.size();
    const auto queue = queue_;
    const auto seq = seq_;
    try
    {
        switch (m.to.role)
        {
        case Role::ue:
            on_ue(m);
            break;
        case Role::gnb:
            on_gnb(m);
            break;
        case Role::lmf:
            on_lmf(m);
            break;
        }
    }
    catch (const std::exception &e)
    {
        ues_ = ues;
        gnbs_ = gnbs;
        sessions_ = sessions;
        trace_.resize(trace_size);
        queue_ = queue;
        seq_ = seq;
        protocol_error(m, e.what());
    }
}

void PositioningNetwork::on_ue(const Message &m)
{
    auto it = ues_.find(m.to.id);
    if (it == ues_.end())
        throw std::invalid_argument("unknown UE");
    UeNodeState &u = it->second;
    if (!u.responsive)
        return;
    const NodeId self = m.to;
    switch (m.kind)
    {
    case MessageKind::rrc_srs_config:
    {
        if (body_int(m.payload, "ue") != self.id)
            throw std::invalid_argument("SRS configuration addressed to another UE");
        decode_srs_resource(m.payload.at("srs"));
        u.srs = m.payload.at("srs");
        if (u.stage == UeStage::idle)
            u.stage = UeStage::srs_configured;
        return;
    }
    case MessageKind::lpp_provide_assistance_data:
    {
        if (!m.payload.is_object() || !m.payload.contains("prs"))
            throw std::invalid_argument("assistance data without PRS configuration");
        decode_prs_tree(m.payload.at("prs"));
        u.assistance = m.payload;
        if (u.stage != UeStage::reported)
            u.stage = UeStage::assisted;
        return;
    }
    case MessageKind::lpp_request_capabilities:
        send(MessageKind::lpp_provide_capabilities, self, lmf_node(),
             {{"ue", self.id}, {"methods", {"dl-tdoa", "multi-rtt"}}});
        return;
    case MessageKind::lpp_request_location_information:
    {
        if (!m.payload.is_object() || !m.payload.contains("method") || !m.payload.at("method").is_string())
            throw std::invalid_argument("location request without method");
        const Method method = method_from_string(m.payload.at("method").get<std::string>());
        if (!u.assistance)
            throw std::invalid_argument("location request before assistance data");
        if (method == Method::multi_rtt && !u.srs)
            throw std::invalid_argument("multi-RTT location request before SRS configuration");
        if (!hooks_.ue_measure)
            throw std::logic_error("no UE measurement hook");
        json recs = json::array();
        for (const auto &r : hooks_.ue_measure(self.id, method))
        {
            json j;
            to_json(j, r);
            recs.push_back(std::move(j));
        }
        u.stage = UeStage::reported;
        send(MessageKind::lpp_provide_location_information, self, lmf_node(),
             {{"ue", self.id}, {"method", to_string(method)}, {"records", recs}});
        return;
    }
    default:
        throw std::invalid_argument("message kind not accepted by a UE");
    }
}

void PositioningNetwork::on_gnb(const Message &m)
{
    auto it = gnbs_.find(m.to.id);
    if (it == gnbs_.end())
        throw std::invalid_argument("unknown gNB");
    GnbNodeState &g = it->second;
    const NodeId self = m.to;
    switch (m.kind)
    {
    case MessageKind::nrppa_positioning_information_request:
    {
        const int ue = body_int(m.payload, "ue");
        if (!ues_.count(ue))
            throw std::invalid_argument("positioning information request for unknown UE");
        const json srs = encode(setup_.srs);
        g.configured[ue] = srs;
        send(MessageKind::rrc_srs_config, self, ue_node(ue), {{"ue", ue}, {"srs", srs}});
        send(MessageKind::nrppa_positioning_information_response, self, lmf_node(), {{"ue", ue}, {"srs", srs}});
        return;
    }
    case MessageKind::nrppa_measurement_request:
    {
        const int ue = body_int(m.payload, "ue");
        if (!m.payload.contains("srs"))
            throw std::invalid_argument("measurement request without SRS configuration");
        decode_srs_resource(m.payload.at("srs"));
        if (!hooks_.gnb_measure)
            throw std::logic_error("no gNB measurement hook");
        json recs = json::array();
        for (const auto &r : hooks_.gnb_measure(self.id, ue))
        {
            json j;
            to_json(j, r);
            recs.push_back(std::move(j));
        }
        g.measured.insert(ue);
        send(MessageKind::nrppa_measurement_response, self, lmf_node(),
             {{"ue", ue}, {"trp_id", self.id}, {"records", recs}});
        return;
    }
    default:
        throw std::invalid_argument("message kind not accepted by a gNB");
    }
}

void PositioningNetwork::on_lmf(const Message &m)
{
    if (m.kind == MessageKind::lpp_request_assistance_data)
    {
        // On-demand request: stateless on the LMF side.
        if (body_int(m.payload, "ue") != m.from.id)
            throw std::invalid_argument("assistance request body names another UE");
        const json &types = body_array(m.payload, "types");
        if (std::find(types.begin(), types.end(), json("dl-prs")) == types.end())
            throw std::invalid_argument("assistance request does not ask for dl-prs");
        if (!ues_.count(m.from.id))
            throw std::invalid_argument("assistance request from unknown UE");
        json body = assistance_body();
        body["on_demand"] = true;
        send(MessageKind::lpp_provide_assistance_data, lmf_node(), m.from, std::move(body));
        return;
    }

    const int ue = m.from.role == Role::ue ? m.from.id : body_int(m.payload, "ue");
    if (m.from.role == Role::ue && body_int(m.payload, "ue") != ue)
        throw std::invalid_argument("body names another UE");
    auto it = sessions_.find(ue);
    if (it == sessions_.end())
        throw std::invalid_argument("no session for UE");
    LmfSession &s = it->second;
    const NodeId lmf = lmf_node();

    auto request_location = [&] {
        json body = assistance_body();
        body["on_demand"] = false;
        send(MessageKind::lpp_provide_assistance_data, lmf, ue_node(ue), std::move(body));
        send(MessageKind::lpp_request_location_information, lmf, ue_node(ue), {{"method", to_string(s.method)}});
        s.stage = LmfStage::await_location_information;
        arm_timer(ue);
    };

    switch (m.kind)
    {
    case MessageKind::lpp_provide_capabilities:
    {
        if (s.stage != LmfStage::await_capabilities)
            throw std::invalid_argument("unexpected capabilities");
        const json &methods = body_array(m.payload, "methods");
        if (std::find(methods.begin(), methods.end(), json(to_string(s.method))) == methods.end())
        {
            abort_session(ue, "UE does not support " + to_string(s.method));
            return;
        }
        request_location();
        return;
    }
    case MessageKind::nrppa_positioning_information_response:
    {
        if (s.stage != LmfStage::await_positioning_information)
            throw std::invalid_argument("unexpected positioning information response");
        if (m.from.id != ues_.at(ue).serving_gnb)
            throw std::invalid_argument("response from a gNB other than the serving one");
        if (!m.payload.contains("srs"))
            throw std::invalid_argument("positioning information without SRS configuration");
        decode_srs_resource(m.payload.at("srs"));
        s.srs = m.payload.at("srs");
        request_location();
        return;
    }
    case MessageKind::lpp_provide_location_information:
    {
        if (s.stage != LmfStage::await_location_information)
            throw std::invalid_argument("unexpected location information");
        const json &recs = body_array(m.payload, "records");
        decode_records(recs);
        s.ue_records = recs;
        if (s.method == Method::multi_rtt)
        {
            // UE report first, then the gNB measurements.
            s.pending_gnbs.clear();
            for (const auto &[id, pos] : setup_.anchors)
            {
                s.pending_gnbs.insert(id);
                send(MessageKind::nrppa_measurement_request, lmf, gnb_node(id), {{"ue", ue}, {"srs", *s.srs}});
            }
            s.stage = LmfStage::await_measurements;
            arm_timer(ue);
            return;
        }
        finish_session(ue);
        return;
    }
    case MessageKind::nrppa_measurement_response:
    {
        if (s.stage != LmfStage::await_measurements || !s.pending_gnbs.count(m.from.id))
            throw std::invalid_argument("unexpected measurement response");
        const json &recs = body_array(m.payload, "records");
        decode_records(recs);
        for (const auto &r : recs)
            s.gnb_records.push_back(r);
        s.pending_gnbs.erase(m.from.id);
        if (s.pending_gnbs.empty())
            finish_session(ue);
        return;
    }
    default:
        throw std::invalid_argument("message kind not accepted by the LMF");
    }
}

void PositioningNetwork::finish_session(int ue)
{
    LmfSession &s = sessions_.at(ue);
    try
    {
        const PositionFix fix =
            solve_reported(s.method, setup_.anchors, s.ue_records, s.gnb_records, setup_.solver, setup_.payload);
        s.stage = LmfStage::done;
        fixes_[ue] = fix;
        trace_.push_back(fix_entry(now_, ue, fix));
    }
    catch (const std::exception &e)
    {
        abort_session(ue, std::string("solver: ") + e.what());
    }
}

SessionResult PositioningNetwork::run(Method method)
{
    if (ues_.empty())
        throw std::invalid_argument("no UEs registered");
    run_start_ = trace_.size();
    fixes_.clear();
    aborted_.clear();
    for (const auto &[id, u] : ues_)
    {
        LmfSession s;
        s.method = method;
        sessions_[id] = s;
    }
    for (const auto &[id, u] : ues_)
    {
        LmfSession &s = sessions_.at(id);
        if (method == Method::multi_rtt)
        {
            s.stage = LmfStage::await_positioning_information;
            send(MessageKind::nrppa_positioning_information_request, lmf_node(), gnb_node(u.serving_gnb),
                 {{"ue", id}});
        }
        else
        {
            s.stage = LmfStage::await_capabilities;
            send(MessageKind::lpp_request_capabilities, lmf_node(), ue_node(id), json::object());
        }
        arm_timer(id);
    }
    drain();
    SessionResult r;
    r.fixes = fixes_;
    r.aborted = aborted_;
    r.trace.assign(trace_.begin() + static_cast<std::ptrdiff_t>(run_start_), trace_.end());
    return r;
}

SessionResult PositioningNetwork::run_multi_rtt() { return run(Method::multi_rtt); }
SessionResult PositioningNetwork::run_dl_tdoa() { return run(Method::dl_tdoa); }

json PositioningNetwork::request_assistance_on_demand(int ue_id)
{
    auto it = ues_.find(ue_id);
    if (it == ues_.end())
        throw std::invalid_argument("request_assistance_on_demand: unknown UE");
    const std::size_t before = trace_.size();
    send(MessageKind::lpp_request_assistance_data, ue_node(ue_id), lmf_node(),
         {{"ue", ue_id}, {"types", {"dl-prs"}}});
    drain();
    for (std::size_t i = before; i < trace_.size(); ++i)
    {
        const json &e = trace_[i];
        if (e.at("type") == "message" && e.at("kind") == to_string(MessageKind::lpp_provide_assistance_data) &&
            e.at("to") == ue_node(ue_id).str() && it->second.assistance && *it->second.assistance == e.at("payload"))
            return e.at("payload").at("prs");
    }
    trace_.push_back({{"type", "abort"}, {"t", now_ + setup_.session.timeout_s}, {"ue", ue_id},
                      {"reason", "assistance request timeout"}});
    now_ += setup_.session.timeout_s;
    throw SessionTimeout("assistance data request timed out");
}

void PositioningNetwork::inject(Message msg)
{
    msg.timestamp = now_;
    if (!route_allowed(msg.kind, msg.from, msg.to))
    {
        protocol_error(msg, "illegal route");
        return;
    }
    json entry = to_json(msg);
    entry["type"] = "message";
    trace_.push_back(std::move(entry));
    Event e;
    e.time = now_ + setup_.session.hop_latency_s;
    e.seq = seq_++;
    e.msg = std::move(msg);
    queue_.push(std::move(e));
    drain();
}

// ---- Replay --------------------------------------------------------------

std::map<int, PositionFix> replay_solve(const std::vector<json> &trace, const AnchorMap &anchors,
                                        const SolverOptions &opt, RecordPayload payload)
{
    struct Collected
    {
        std::optional<Method> method;
        json ue = json::array();
        json gnb = json::array();
    };
    std::map<int, Collected> per_ue;
    std::set<int> fixed;
    for (const json &e : trace)
    {
        const std::string type = e.at("type").get<std::string>();
        if (type == "fix")
        {
            fixed.insert(e.at("ue").get<int>());
            continue;
        }
        if (type != "message")
            continue;
        const MessageKind kind = message_kind_from_string(e.at("kind").get<std::string>());
        const json &body = e.at("payload");
        if (kind == MessageKind::lpp_provide_location_information)
        {
            Collected &c = per_ue[body.at("ue").get<int>()];
            c.method = method_from_string(body.at("method").get<std::string>());
            c.ue = body.at("records");
            c.gnb = json::array();
        }
        else if (kind == MessageKind::nrppa_measurement_response)
        {
            Collected &c = per_ue[body.at("ue").get<int>()];
            for (const auto &r : body.at("records"))
                c.gnb.push_back(r);
        }
    }
    std::map<int, PositionFix> out;
    for (int ue : fixed)
    {
        const Collected &c = per_ue.at(ue);
        if (!c.method)
            throw std::invalid_argument("replay_solve: fix without a location report");
        out[ue] = solve_reported(*c.method, anchors, c.ue, c.gnb, opt, payload);
    }
    return out;
}

} // namespace nrpos
