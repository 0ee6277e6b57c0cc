// Canonical domain types: flows, the egress link, and the FlowSet JSON format
// that every CLI subcommand ingests.
#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "portsched/ticks.hpp"

namespace portsched {

enum class FlowClass { TimeSensitive, BestEffort };

inline std::string to_string(FlowClass c) {
    return c == FlowClass::TimeSensitive ? "TS" : "BE";
}

// One periodic (TS) or best-effort traffic stream on a single egress port.
struct Flow {
    int id = 0;
    FlowClass cls = FlowClass::TimeSensitive;
    Tick period = 0;              // T_i, TS only (0 for BE)
    std::int64_t size_bytes = 0;  // 0 for BE sources with per-packet random sizes
    Tick service_time = 0;        // tau_i, derived from size and link rate
    Tick arrival = 0;             // b_i, arrival of the first packet
    Tick initial_offset = 0;      // phi_i, emergence offset at this port
    Tick processing = 0;          // p_i
    Tick accumulated_jitter = 0;  // J_i
    Tick delay_bound = kNoBound;
    Tick jitter_bound = kNoBound;
    int priority = 0;             // 0 = highest

    bool is_ts() const { return cls == FlowClass::TimeSensitive; }

    // Earliest instant the first packet can depart (Algorithm start point).
    Tick emergence() const { return initial_offset + processing; }

    bool operator==(const Flow&) const = default;
};

// The egress link under scheduling.
struct EdgeSpec {
    std::int64_t rate_bps = 1'000'000'000;
    int queue_count = 8;
    int max_queue_len = 64;  // packets, drop-tail for BE queues

    bool operator==(const EdgeSpec&) const = default;
};

// End-to-end route description. Data only: scheduling here is single-egress.
struct FlowRoute {
    std::vector<std::string> path;    // EN_a, SW_1 ... SW_n, EN_b
    std::vector<Tick> egress_offsets; // one per egress port on the path
    std::int64_t packet_count = 0;

    void validate() const {
        if (path.size() < 2) throw SpecError("route needs at least two nodes");
        if (egress_offsets.size() != path.size() - 1)
            throw SpecError("route offset count must equal egress port count");
    }
};

struct FlowSet {
    EdgeSpec link;
    std::vector<Flow> flows;  // sorted by ascending id

    std::vector<Flow> ts_flows() const {
        std::vector<Flow> out;
        for (const Flow& f : flows)
            if (f.is_ts()) out.push_back(f);
        return out;
    }
};

// Service time of one packet: ceil(size * 8 / rate), in ns.
inline Tick service_time(std::int64_t size_bytes, std::int64_t rate_bps) {
    if (rate_bps <= 0) throw SpecError("link rate must be positive");
    if (size_bytes < 1) throw SpecError("packet size must be at least one byte");
    Wide bits_ns = checked_mul_wide(static_cast<Wide>(size_bytes) * 8, 1'000'000'000);
    Wide q = div_ceil_wide(bits_ns, static_cast<Wide>(rate_bps));
    return narrow_tick(q, "service time");
}

// Long-run bandwidth of a TS flow in bit/s.
inline double flow_bandwidth(const Flow& f) {
    if (!f.is_ts()) throw SpecError("bandwidth is defined for TS flows only");
    if (f.period <= 0) throw SpecError("TS flow needs a positive period");
    if (f.size_bytes < 1) throw SpecError("flow packet size must be at least one byte");
    return static_cast<double>(f.size_bytes) * 8.0 * 1e9 / static_cast<double>(f.period);
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw SpecError("unknown key \"" + it.key() + "\" in " + where);
}

inline Tick tick_field(const nlohmann::json& j, const char* key, Tick fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<Tick>();
}

} // namespace detail

inline FlowSet flowset_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(j, {"link", "flows"}, "flow set");
    if (!j.contains("link") || !j.contains("flows"))
        throw SpecError("flow set needs \"link\" and \"flows\"");

    FlowSet fs;
    const auto& link = j.at("link");
    detail::reject_unknown_keys(link, {"rate_bps", "queues", "max_queue_len"}, "link");
    fs.link.rate_bps = link.at("rate_bps").get<std::int64_t>();
    if (fs.link.rate_bps <= 0) throw SpecError("link rate must be positive");
    if (link.contains("queues")) fs.link.queue_count = link.at("queues").get<int>();
    if (fs.link.queue_count < 1) throw SpecError("queue count must be at least 1");
    if (link.contains("max_queue_len")) fs.link.max_queue_len = link.at("max_queue_len").get<int>();
    if (fs.link.max_queue_len < 1) throw SpecError("max queue length must be at least 1");

    static const std::set<std::string> flow_keys = {
        "id", "class", "period_ns", "size_bytes", "arrival_ns", "processing_ns",
        "accumulated_jitter_ns", "delay_bound_ns", "jitter_bound_ns", "priority"};
    for (const auto& fj : j.at("flows")) {
        detail::reject_unknown_keys(fj, flow_keys, "flow");
        Flow f;
        f.id = fj.at("id").get<int>();
        std::string cls = fj.at("class").get<std::string>();
        if (cls == "TS") f.cls = FlowClass::TimeSensitive;
        else if (cls == "BE") f.cls = FlowClass::BestEffort;
        else throw SpecError("flow class must be \"TS\" or \"BE\"");
        f.period = detail::tick_field(fj, "period_ns", 0);
        f.size_bytes = fj.contains("size_bytes") ? fj.at("size_bytes").get<std::int64_t>() : 0;
        f.arrival = detail::tick_field(fj, "arrival_ns", 0);
        f.processing = detail::tick_field(fj, "processing_ns", 0);
        f.accumulated_jitter = detail::tick_field(fj, "accumulated_jitter_ns", 0);
        f.delay_bound = detail::tick_field(fj, "delay_bound_ns", kNoBound);
        f.jitter_bound = detail::tick_field(fj, "jitter_bound_ns", kNoBound);
        f.priority = fj.contains("priority") ? fj.at("priority").get<int>() : 0;

        // The file format carries no separate emergence offset; the first
        // packet emerges at arrival + processing.
        f.initial_offset = f.arrival;

        if (f.is_ts()) {
            if (f.period <= 0) throw SpecError("TS flow " + std::to_string(f.id) + " needs period_ns > 0");
            if (f.size_bytes < 1) throw SpecError("TS flow " + std::to_string(f.id) + " needs size_bytes >= 1");
            f.service_time = service_time(f.size_bytes, fs.link.rate_bps);
            if (f.service_time >= f.period)
                throw SpecError("TS flow " + std::to_string(f.id) + " has service time >= period");
        } else {
            if (f.period != 0) throw SpecError("BE flow " + std::to_string(f.id) + " must not carry a period");
            f.service_time = f.size_bytes >= 1 ? service_time(f.size_bytes, fs.link.rate_bps) : 0;
        }
        if (f.processing < 0 || f.accumulated_jitter < 0 || f.arrival < 0)
            throw SpecError("flow " + std::to_string(f.id) + " has a negative time field");
        if (f.jitter_bound > f.delay_bound)
            throw SpecError("flow " + std::to_string(f.id) + " jitter bound exceeds delay bound");
        if (f.arrival > f.emergence())
            throw SpecError("flow " + std::to_string(f.id) + " arrives after its emergence");
        fs.flows.push_back(f);
    }

    std::sort(fs.flows.begin(), fs.flows.end(),
              [](const Flow& a, const Flow& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < fs.flows.size(); ++i)
        if (fs.flows[i].id == fs.flows[i - 1].id)
            throw SpecError("duplicate flow id " + std::to_string(fs.flows[i].id));
    return fs;
}

inline FlowSet parse_flowset(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("malformed flow set JSON: ") + e.what());
    }
    try {
        return flowset_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("malformed flow set JSON: ") + e.what());
    }
}

inline nlohmann::json serialize_flowset(const FlowSet& fs) {
    nlohmann::json j;
    j["link"] = {{"rate_bps", fs.link.rate_bps},
                 {"queues", fs.link.queue_count},
                 {"max_queue_len", fs.link.max_queue_len}};
    j["flows"] = nlohmann::json::array();
    for (const Flow& f : fs.flows) {
        nlohmann::json fj;
        fj["id"] = f.id;
        fj["class"] = to_string(f.cls);
        if (f.is_ts()) fj["period_ns"] = f.period;
        fj["size_bytes"] = f.size_bytes;
        fj["arrival_ns"] = f.arrival;
        fj["processing_ns"] = f.processing;
        fj["accumulated_jitter_ns"] = f.accumulated_jitter;
        if (f.delay_bound != kNoBound) fj["delay_bound_ns"] = f.delay_bound;
        if (f.jitter_bound != kNoBound) fj["jitter_bound_ns"] = f.jitter_bound;
        fj["priority"] = f.priority;
        j["flows"].push_back(fj);
    }
    return j;
}

} // namespace portsched
