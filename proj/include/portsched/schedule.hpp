// Static schedule representation: reserved transmission windows over one
// hyperperiod, gate control lists, and the independent verification verdict.
//
// Gate masks are stored with bit q = queue q. The JSON "gates" string and the
// CSV hex column both render the visual form with queue 0 leftmost, i.e.
// "0b10000000" (= 0x80) means queue 0 open on an 8-queue port.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "portsched/combinability.hpp"
#include "portsched/flow.hpp"
#include "portsched/ticks.hpp"

namespace portsched {

enum class ScheduleMode { IdealOffsets, PerPacketTable };

struct PacketWindow {
    int flow_id = 0;
    std::int64_t packet_index = 0;
    Tick start = 0;
    Tick end = 0;

    bool operator==(const PacketWindow&) const = default;
};

struct FlowDeparture {
    int flow_id = 0;
    Tick first_departure = 0;  // emergence + minimal delay; may exceed the period

    bool operator==(const FlowDeparture&) const = default;
};

// Reserved windows for the TS flows. Ideal mode stores one departure grid per
// flow (packet n departs at first_departure + n*T); table mode stores the
// per-packet windows of one steady-state hyperperiod.
struct Schedule {
    ScheduleMode mode = ScheduleMode::IdealOffsets;
    Tick cycle = 0;  // hyperperiod; 0 means "no reservations"
    std::vector<FlowDeparture> departures;
    std::vector<PacketWindow> table;

    bool empty() const { return cycle == 0 || (departures.empty() && table.empty()); }

    bool operator==(const Schedule&) const = default;
};

struct GclRow {
    Tick start = 0;
    Tick end = 0;
    std::uint32_t gate_mask = 0;  // bit q = queue q open

    bool operator==(const GclRow&) const = default;
};

struct GateControlList {
    Tick cycle = 0;
    int queue_count = 8;
    std::vector<GclRow> rows;  // sorted, non-overlapping, tiling [0, cycle)

    bool operator==(const GateControlList&) const = default;
};

enum class ViolationKind { Overlap, Deadline, Jitter, Bandwidth };

inline std::string to_string(ViolationKind k) {
    switch (k) {
        case ViolationKind::Overlap: return "overlap";
        case ViolationKind::Deadline: return "deadline";
        case ViolationKind::Jitter: return "jitter";
        default: return "bandwidth";
    }
}

struct Violation {
    ViolationKind kind = ViolationKind::Overlap;
    int flow_id = -1;
    std::int64_t packet_index = -1;
    Tick time = 0;
    std::string detail;
};

struct ScheduleVerdict {
    bool schedulable = false;
    int unsolved = 0;  // S flag of the offset search
    std::vector<Violation> violations;
};

namespace detail {

inline const Flow& flow_by_id(const std::vector<Flow>& flows, int id) {
    for (const Flow& f : flows)
        if (f.id == id) return f;
    throw SpecError("unknown flow id " + std::to_string(id));
}

} // namespace detail

// Steady-state windows of one cycle, positions in [0, cycle). Packet indices
// are the first concrete index occupying each grid position.
inline std::vector<PacketWindow> cycle_windows(const Schedule& sched, const std::vector<Flow>& flows) {
    std::vector<PacketWindow> out;
    if (sched.empty()) return out;
    if (sched.mode == ScheduleMode::PerPacketTable) {
        out = sched.table;
    } else {
        for (const FlowDeparture& fd : sched.departures) {
            const Flow& f = detail::flow_by_id(flows, fd.flow_id);
            const Tick r = mod_pos(fd.first_departure, f.period);
            for (Tick s = r; s < sched.cycle; s += f.period) {
                const std::int64_t n = mod_pos(s - fd.first_departure, sched.cycle) / f.period;
                out.push_back({fd.flow_id, n, s, s + f.service_time});
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const PacketWindow& a, const PacketWindow& b) {
        return std::tie(a.start, a.flow_id, a.packet_index) < std::tie(b.start, b.flow_id, b.packet_index);
    });
    return out;
}

// Pairs of overlapping windows on the cycle circle (a window crossing the
// cycle end is compared against the next cycle's start).
inline std::vector<std::pair<PacketWindow, PacketWindow>> find_window_overlaps(
    std::vector<PacketWindow> windows, Tick cycle) {
    std::vector<std::pair<PacketWindow, PacketWindow>> out;
    if (windows.size() < 2) return out;
    Tick max_len = 0;
    for (const PacketWindow& w : windows) max_len = std::max(max_len, w.end - w.start);

    std::vector<std::pair<PacketWindow, bool>> items;  // window, is-copy
    items.reserve(windows.size() * 2);
    for (const PacketWindow& w : windows) {
        items.push_back({w, false});
        if (cycle > 0 && w.start < max_len)
            items.push_back({{w.flow_id, w.packet_index, w.start + cycle, w.end + cycle}, true});
    }
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        return std::tie(a.first.start, a.first.flow_id, a.first.packet_index) <
               std::tie(b.first.start, b.first.flow_id, b.first.packet_index);
    });
    for (std::size_t i = 0; i < items.size(); ++i) {
        for (std::size_t j = i; j-- > 0;) {
            if (items[j].first.start + max_len <= items[i].first.start) break;
            if (items[j].second && items[i].second) continue;
            if (items[j].first.end > items[i].first.start)
                out.push_back({items[j].first, items[i].first});
        }
    }
    return out;
}

// ---- Gate control list rendering ----------------------------------------

inline std::string gate_mask_string(std::uint32_t mask, int queue_count) {
    std::string s = "0b";
    for (int q = 0; q < queue_count; ++q) s += (mask >> q) & 1u ? '1' : '0';
    return s;
}

inline std::uint64_t gate_mask_visual(std::uint32_t mask, int queue_count) {
    std::uint64_t v = 0;
    for (int q = 0; q < queue_count; ++q)
        if ((mask >> q) & 1u) v |= 1ull << (queue_count - 1 - q);
    return v;
}

inline nlohmann::json gcl_to_json(const GateControlList& gcl) {
    nlohmann::json j;
    j["cycle_ns"] = gcl.cycle;
    j["rows"] = nlohmann::json::array();
    for (const GclRow& r : gcl.rows)
        j["rows"].push_back({{"start_ns", r.start},
                             {"end_ns", r.end},
                             {"gates", gate_mask_string(r.gate_mask, gcl.queue_count)}});
    return j;
}

inline std::string gcl_to_csv(const GateControlList& gcl) {
    std::ostringstream os;
    os << "start_ns,end_ns,gate_mask_hex\n";
    for (const GclRow& r : gcl.rows) {
        os << r.start << ',' << r.end << ",0x" << std::hex
           << gate_mask_visual(r.gate_mask, gcl.queue_count) << std::dec << '\n';
    }
    return os.str();
}

// Per-packet export over one hyperperiod. Ideal mode lists the first
// hyperperiod of each flow's own grid (packet 0 onward).
inline std::string schedule_to_csv(const Schedule& sched, const std::vector<Flow>& flows) {
    std::ostringstream os;
    os << "flow_id,packet_index,start_ns,end_ns\n";
    std::vector<PacketWindow> rows;
    if (sched.mode == ScheduleMode::IdealOffsets) {
        for (const FlowDeparture& fd : sched.departures) {
            const Flow& f = detail::flow_by_id(flows, fd.flow_id);
            for (std::int64_t n = 0; n * f.period < sched.cycle; ++n) {
                const Tick s = fd.first_departure + static_cast<Tick>(n) * f.period;
                rows.push_back({fd.flow_id, n, s, s + f.service_time});
            }
        }
        std::sort(rows.begin(), rows.end(), [](const PacketWindow& a, const PacketWindow& b) {
            return std::tie(a.start, a.flow_id) < std::tie(b.start, b.flow_id);
        });
    } else {
        rows = sched.table;
    }
    for (const PacketWindow& w : rows)
        os << w.flow_id << ',' << w.packet_index << ',' << w.start << ',' << w.end << '\n';
    return os.str();
}

inline nlohmann::json schedule_to_json(const Schedule& sched) {
    nlohmann::json j;
    if (sched.empty()) {
        j["mode"] = "none";
        return j;
    }
    j["cycle_ns"] = sched.cycle;
    if (sched.mode == ScheduleMode::IdealOffsets) {
        j["mode"] = "ideal";
        j["offsets"] = nlohmann::json::array();
        for (const FlowDeparture& fd : sched.departures)
            j["offsets"].push_back({{"flow_id", fd.flow_id}, {"first_departure_ns", fd.first_departure}});
    } else {
        j["mode"] = "table";
        j["windows"] = nlohmann::json::array();
        for (const PacketWindow& w : sched.table)
            j["windows"].push_back({{"flow_id", w.flow_id},
                                    {"packet_index", w.packet_index},
                                    {"start_ns", w.start},
                                    {"end_ns", w.end}});
    }
    return j;
}

inline Schedule schedule_from_json(const nlohmann::json& j) {
    Schedule s;
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "none") return s;
    s.cycle = j.at("cycle_ns").get<Tick>();
    if (mode == "ideal") {
        s.mode = ScheduleMode::IdealOffsets;
        for (const auto& o : j.at("offsets"))
            s.departures.push_back({o.at("flow_id").get<int>(), o.at("first_departure_ns").get<Tick>()});
    } else if (mode == "table") {
        s.mode = ScheduleMode::PerPacketTable;
        for (const auto& w : j.at("windows"))
            s.table.push_back({w.at("flow_id").get<int>(), w.at("packet_index").get<std::int64_t>(),
                               w.at("start_ns").get<Tick>(), w.at("end_ns").get<Tick>()});
    } else {
        throw SpecError("unknown schedule mode \"" + mode + "\"");
    }
    return s;
}

inline nlohmann::json verdict_to_json(const ScheduleVerdict& v) {
    nlohmann::json j;
    j["schedulable"] = v.schedulable;
    j["unsolved"] = v.unsolved;
    j["violations"] = nlohmann::json::array();
    for (const Violation& viol : v.violations)
        j["violations"].push_back({{"kind", to_string(viol.kind)},
                                   {"flow_id", viol.flow_id},
                                   {"packet_index", viol.packet_index},
                                   {"time_ns", viol.time},
                                   {"detail", viol.detail}});
    return j;
}

} // namespace portsched
