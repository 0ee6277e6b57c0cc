// Discrete-event simulation of one gated egress port: periodic TS arrivals,
// seeded stochastic BE arrivals, GCL-driven gates, a pluggable best-effort
// policy, and metrics collection.
//
// Event ordering at equal timestamps: gate-change, arrival, drop, miss,
// tx-end, tx-start. The log is fully ordered, so identical scenarios yield
// bit-identical logs.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "portsched/dqs.hpp"
#include "portsched/flow.hpp"
#include "portsched/nds.hpp"
#include "portsched/rng.hpp"
#include "portsched/schedule.hpp"
#include "portsched/ticks.hpp"

namespace portsched {

enum class BePolicy { Dqs, ResidualFifo, StrictPriority };

inline std::string to_string(BePolicy p) {
    switch (p) {
        case BePolicy::Dqs: return "dqs";
        case BePolicy::ResidualFifo: return "fifo";
        default: return "sp";
    }
}

inline BePolicy be_policy_from_string(const std::string& s) {
    if (s == "dqs") return BePolicy::Dqs;
    if (s == "fifo") return BePolicy::ResidualFifo;
    if (s == "sp") return BePolicy::StrictPriority;
    throw SpecError("unknown policy \"" + s + "\" (expected dqs, fifo, or sp)");
}

struct BeTraceEntry {
    Tick time = 0;
    int flow_id = -1;
    std::int64_t size_bytes = 0;
};

struct Scenario {
    FlowSet flowset;
    Schedule schedule;  // empty schedule = ungated port (benchmark mode)
    BePolicy policy = BePolicy::StrictPriority;
    Tick horizon = 0;
    std::uint64_t seed = 1;
    UtilityParams utility;  // empty c -> defaults sized to the BE queue count
    double be_load = 0.0;   // offered BE load as a fraction of the link rate
    int be_size_min = 64;
    int be_size_max = 1518;
    std::vector<BeTraceEntry> be_trace;  // scripted arrivals; flows with trace entries skip Poisson
};

enum class EventKind { GateChange, Arrival, Drop, Miss, TxStart, TxEnd };

inline std::string to_string(EventKind k) {
    switch (k) {
        case EventKind::GateChange: return "gate-change";
        case EventKind::Arrival: return "arrival";
        case EventKind::Drop: return "drop";
        case EventKind::Miss: return "miss";
        case EventKind::TxStart: return "tx-start";
        default: return "tx-end";
    }
}

struct Event {
    Tick time = 0;
    EventKind kind = EventKind::Arrival;
    int flow_id = -1;
    std::int64_t packet = -1;
    int queue = -1;

    bool operator==(const Event&) const = default;
};

using EventLog = std::vector<Event>;

struct FlowMetrics {
    int flow_id = 0;
    FlowClass cls = FlowClass::TimeSensitive;
    std::int64_t arrived = 0;
    std::int64_t transmitted = 0;
    std::int64_t dropped = 0;
    std::int64_t queued_at_end = 0;
    Tick delay_min = 0;
    Tick delay_max = 0;
    double delay_mean = 0;
    Tick jitter = 0;  // max - min delay
};

struct MetricsReport {
    Tick horizon = 0;
    double utilization = 0;
    double ts_utilization = 0;
    double be_utilization = 0;
    std::int64_t misses = 0;
    std::vector<FlowMetrics> flows;
    std::vector<std::int64_t> drops_per_queue;
};

namespace detail {

struct SimPacket {
    Tick arrival = 0;
    int flow_id = -1;
    std::int64_t packet = 0;
    Tick service = 0;
    int queue = 0;
    bool ts = false;
};

struct AbsWindow {
    Tick start = 0;
    Tick end = 0;
    int flow_id = -1;
    std::int64_t packet = 0;
};

inline int event_rank(EventKind k) {
    switch (k) {
        case EventKind::GateChange: return 0;
        case EventKind::Arrival: return 1;
        case EventKind::Drop: return 2;
        case EventKind::Miss: return 3;
        case EventKind::TxEnd: return 4;
        default: return 5;
    }
}

} // namespace detail

// Per-flow delay statistics, utilization, and accounting totals from a log.
// queued_at_end is derived from the accounting identity here; run_simulation
// replaces it with the actual end-of-run queue occupancy.
inline MetricsReport compute_metrics(const EventLog& log, const Scenario& scenario) {
    MetricsReport rep;
    rep.horizon = scenario.horizon;
    rep.drops_per_queue.assign(scenario.flowset.link.queue_count, 0);

    std::map<int, FlowMetrics> per_flow;
    for (const Flow& f : scenario.flowset.flows) {
        FlowMetrics m;
        m.flow_id = f.id;
        m.cls = f.cls;
        per_flow[f.id] = m;
    }

    std::map<std::pair<int, std::int64_t>, Tick> arrival_of;
    std::map<std::pair<int, std::int64_t>, Tick> start_of;
    std::map<int, std::vector<Tick>> delays;
    Tick busy = 0, ts_busy = 0, be_busy = 0;

    for (const Event& e : log) {
        switch (e.kind) {
            case EventKind::Arrival:
                arrival_of[{e.flow_id, e.packet}] = e.time;
                per_flow.at(e.flow_id).arrived++;
                break;
            case EventKind::Drop:
                per_flow.at(e.flow_id).dropped++;
                if (e.queue >= 0 && e.queue < static_cast<int>(rep.drops_per_queue.size()))
                    rep.drops_per_queue[static_cast<std::size_t>(e.queue)]++;
                break;
            case EventKind::Miss:
                rep.misses++;
                break;
            case EventKind::TxStart:
                start_of[{e.flow_id, e.packet}] = e.time;
                break;
            case EventKind::TxEnd: {
                per_flow.at(e.flow_id).transmitted++;
                const Tick start = start_of.at({e.flow_id, e.packet});
                const Tick clipped_end = std::min(e.time, scenario.horizon);
                if (start < scenario.horizon) {
                    const Tick dur = clipped_end - start;
                    busy += dur;
                    if (per_flow.at(e.flow_id).cls == FlowClass::TimeSensitive)
                        ts_busy += dur;
                    else
                        be_busy += dur;
                }
                delays[e.flow_id].push_back(e.time - arrival_of.at({e.flow_id, e.packet}));
                break;
            }
            default:
                break;
        }
    }

    for (auto& [id, m] : per_flow) {
        auto it = delays.find(id);
        if (it != delays.end() && !it->second.empty()) {
            m.delay_min = *std::min_element(it->second.begin(), it->second.end());
            m.delay_max = *std::max_element(it->second.begin(), it->second.end());
            double sum = 0;
            for (Tick d : it->second) sum += static_cast<double>(d);
            m.delay_mean = sum / static_cast<double>(it->second.size());
            m.jitter = m.delay_max - m.delay_min;
        }
        m.queued_at_end = m.arrived - m.transmitted - m.dropped;
        rep.flows.push_back(m);
    }
    if (scenario.horizon > 0) {
        rep.utilization = static_cast<double>(busy) / static_cast<double>(scenario.horizon);
        rep.ts_utilization = static_cast<double>(ts_busy) / static_cast<double>(scenario.horizon);
        rep.be_utilization = static_cast<double>(be_busy) / static_cast<double>(scenario.horizon);
    }
    return rep;
}

inline std::pair<EventLog, MetricsReport> run_simulation(const Scenario& scenario) {
    const FlowSet& fs = scenario.flowset;
    if (scenario.horizon <= 0) throw SpecError("scenario horizon must be positive");
    if (!scenario.schedule.empty() && scenario.horizon % scenario.schedule.cycle != 0)
        throw SpecError("horizon must be a positive multiple of the GCL cycle");

    std::vector<Flow> ts_flows = fs.ts_flows();
    if (scenario.schedule.empty() && !ts_flows.empty() &&
        scenario.policy != BePolicy::StrictPriority)
        throw SpecError("an ungated port with TS flows supports only the sp policy");

    const QueueAssignment qa = assign_queues(fs);
    const int n_queues = fs.link.queue_count;

    // ---- arrival streams -------------------------------------------------
    std::set<int> traced;
    for (const BeTraceEntry& e : scenario.be_trace) traced.insert(e.flow_id);

    std::vector<detail::SimPacket> arrivals;
    for (const Flow& f : fs.flows) {
        if (f.is_ts()) {
            for (Tick t = f.arrival, n = 0; t < scenario.horizon; t += f.period, ++n)
                arrivals.push_back({t, f.id, n, f.service_time, qa.queue_of_flow.at(f.id), true});
        } else if (traced.count(f.id)) {
            std::int64_t n = 0;
            for (const BeTraceEntry& e : scenario.be_trace)
                if (e.flow_id == f.id && e.time < scenario.horizon)
                    arrivals.push_back({e.time, f.id, n++, service_time(e.size_bytes, fs.link.rate_bps),
                                        qa.queue_of_flow.at(f.id), false});
        } else if (scenario.be_load > 0) {
            std::size_t poisson_sources = 0;
            for (const Flow& g : fs.flows)
                if (!g.is_ts() && !traced.count(g.id)) ++poisson_sources;
            const double share = scenario.be_load * static_cast<double>(fs.link.rate_bps) /
                                 static_cast<double>(poisson_sources);
            const double mean_bits =
                (static_cast<double>(scenario.be_size_min) + scenario.be_size_max) / 2.0 * 8.0;
            const double mean_gap = mean_bits / share * 1e9;  // ns between packets
            Rng rng(scenario.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(f.id + 1)));
            Tick t = std::max<Tick>(1, static_cast<Tick>(std::llround(rng.exponential(mean_gap))));
            std::int64_t n = 0;
            while (t < scenario.horizon) {
                const std::int64_t size = rng.uniform_i64(scenario.be_size_min, scenario.be_size_max);
                arrivals.push_back({t, f.id, n++, service_time(size, fs.link.rate_bps),
                                    qa.queue_of_flow.at(f.id), false});
                t += std::max<Tick>(1, static_cast<Tick>(std::llround(rng.exponential(mean_gap))));
            }
        }
    }
    std::sort(arrivals.begin(), arrivals.end(), [](const auto& a, const auto& b) {
        return std::tie(a.arrival, a.flow_id, a.packet) < std::tie(b.arrival, b.flow_id, b.packet);
    });

    // ---- reserved windows and gate rows ----------------------------------
    std::vector<detail::AbsWindow> windows;
    std::vector<std::pair<Tick, Tick>> ts_rows;  // cycle-relative TS-gated spans
    GateControlList gcl;
    if (!scenario.schedule.empty()) {
        const Tick cycle = scenario.schedule.cycle;
        if (scenario.schedule.mode == ScheduleMode::IdealOffsets) {
            for (const FlowDeparture& fd : scenario.schedule.departures) {
                const Flow& f = detail::flow_by_id(fs.flows, fd.flow_id);
                for (Tick s = fd.first_departure, n = 0; s < scenario.horizon; s += f.period, ++n)
                    windows.push_back({s, s + f.service_time, fd.flow_id, n});
            }
        } else {
            for (const PacketWindow& w : scenario.schedule.table) {
                const Flow& f = detail::flow_by_id(fs.flows, w.flow_id);
                const std::int64_t per_cycle = cycle / f.period;
                for (Tick c = 0; w.start + c * cycle < scenario.horizon; ++c)
                    windows.push_back({w.start + c * cycle, w.end + c * cycle, w.flow_id,
                                       w.packet_index + c * per_cycle});
            }
        }
        std::sort(windows.begin(), windows.end(),
                  [](const auto& a, const auto& b) { return a.start < b.start; });

        gcl = emit_gcl(scenario.schedule, fs.flows, qa, n_queues);
        std::uint32_t be_mask = 0;
        std::set<int> ts_qs(qa.ts_queues.begin(), qa.ts_queues.end());
        for (int q = 0; q < n_queues; ++q)
            if (!ts_qs.count(q)) be_mask |= 1u << q;
        for (const GclRow& r : gcl.rows)
            if ((r.gate_mask & ~be_mask) != 0) ts_rows.push_back({r.start, r.end});
    }
    const Tick cycle = scenario.schedule.empty() ? 0 : scenario.schedule.cycle;

    auto next_ts_row_start = [&](Tick t) -> Tick {
        if (ts_rows.empty()) return kNoBound;
        const Tick c = t / cycle, pos = t % cycle;
        for (const auto& [s, e] : ts_rows)
            if (s >= pos) return c * cycle + s;
        return (c + 1) * cycle + ts_rows.front().first;
    };
    auto ts_row_end_at = [&](Tick t) -> std::optional<Tick> {  // set when t inside a TS row
        if (ts_rows.empty()) return std::nullopt;
        const Tick c = t / cycle, pos = t % cycle;
        for (const auto& [s, e] : ts_rows)
            if (s <= pos && pos < e) return c * cycle + e;
        return std::nullopt;
    };

    // ---- port state -------------------------------------------------------
    std::vector<std::deque<detail::SimPacket>> queues(static_cast<std::size_t>(n_queues));
    EventLog log;

    // Gate-change events, one per row boundary per cycle.
    if (!scenario.schedule.empty())
        for (Tick c = 0; c * cycle < scenario.horizon; ++c)
            for (const GclRow& r : gcl.rows)
                if (c * cycle + r.start < scenario.horizon)
                    log.push_back({c * cycle + r.start, EventKind::GateChange, -1, -1, -1});

    const std::vector<int>& be_queues = qa.be_queues;
    UtilityParams uparams = scenario.utility;
    if (uparams.c.empty() && !be_queues.empty()) uparams = UtilityParams::defaults(be_queues.size());
    ArrivalEstimator estimator(be_queues.size());
    std::vector<std::int64_t> arrivals_since(be_queues.size(), 0);
    Tick last_epoch = 0;

    auto estimator_epoch = [&](Tick now) {
        if (now <= last_epoch) return;
        for (std::size_t i = 0; i < be_queues.size(); ++i) {
            estimator.update(i, arrivals_since[i], now - last_epoch);
            arrivals_since[i] = 0;
        }
        last_epoch = now;
    };

    auto enqueue = [&](const detail::SimPacket& p) {
        log.push_back({p.arrival, EventKind::Arrival, p.flow_id, p.packet, p.queue});
        auto& q = queues[static_cast<std::size_t>(p.queue)];
        if (!p.ts) {
            for (std::size_t i = 0; i < be_queues.size(); ++i)
                if (be_queues[i] == p.queue) arrivals_since[i]++;
            if (static_cast<int>(q.size()) >= fs.link.max_queue_len) {
                log.push_back({p.arrival, EventKind::Drop, p.flow_id, p.packet, p.queue});
                return;
            }
        }
        q.push_back(p);
    };

    auto pop_flow_packet = [&](int queue, int flow_id, Tick now) -> std::optional<detail::SimPacket> {
        auto& q = queues[static_cast<std::size_t>(queue)];
        for (auto it = q.begin(); it != q.end(); ++it)
            if (it->flow_id == flow_id && it->arrival <= now) {
                detail::SimPacket p = *it;
                q.erase(it);
                return p;
            }
        return std::nullopt;
    };

    std::size_t ai = 0, wi = 0;
    Tick t = 0, busy_until = 0;
    bool was_busy = false;

    auto transmit = [&](const detail::SimPacket& p, Tick now) {
        log.push_back({now, EventKind::TxStart, p.flow_id, p.packet, p.queue});
        log.push_back({now + p.service, EventKind::TxEnd, p.flow_id, p.packet, p.queue});
        busy_until = now + p.service;
        was_busy = true;
    };

    while (true) {
        while (ai < arrivals.size() && arrivals[ai].arrival <= t) enqueue(arrivals[ai++]);
        if (t >= scenario.horizon) break;

        const Tick next_arrival = ai < arrivals.size() ? arrivals[ai].arrival : kNoBound;

        if (busy_until > t) {
            t = std::min({busy_until, next_arrival, scenario.horizon});
            continue;
        }
        if (was_busy) {  // port just became free: decision epoch
            estimator_epoch(t);
            was_busy = false;
        }

        // Reserved window handling.
        if (wi < windows.size() && windows[wi].start <= t) {
            const detail::AbsWindow& w = windows[wi];
            if (w.start < t) throw Error("reserved windows overlap");  // schedule was verified
            auto p = pop_flow_packet(qa.queue_of_flow.at(w.flow_id), w.flow_id, t);
            ++wi;
            if (p) {
                transmit(*p, t);
            } else {
                log.push_back({t, EventKind::Miss, w.flow_id, w.packet,
                               qa.queue_of_flow.at(w.flow_id)});
            }
            continue;
        }

        // Inside a TS-gated span without a due window: BE stays blocked.
        if (auto row_end = ts_row_end_at(t)) {
            Tick next = std::min(*row_end, scenario.horizon);
            if (wi < windows.size()) next = std::min(next, windows[wi].start);
            next = std::min(next, next_arrival);
            t = next;
            continue;
        }

        const Tick residual_end = std::min(next_ts_row_start(t), scenario.horizon);
        const Tick residual = residual_end > t ? residual_end - t : 0;
        const bool ungated = scenario.schedule.empty();

        std::optional<detail::SimPacket> pick;
        switch (scenario.policy) {
            case BePolicy::StrictPriority: {
                for (int q = 0; q < n_queues && !pick; ++q) {
                    const bool open =
                        ungated || std::count(be_queues.begin(), be_queues.end(), q) > 0;
                    if (!open) continue;
                    auto& dq = queues[static_cast<std::size_t>(q)];
                    if (!dq.empty() && dq.front().service <= residual) {
                        pick = dq.front();
                        dq.pop_front();
                    }
                }
                break;
            }
            case BePolicy::ResidualFifo: {
                int best_q = -1;
                for (int q : be_queues) {
                    auto& dq = queues[static_cast<std::size_t>(q)];
                    if (dq.empty()) continue;
                    if (best_q < 0 ||
                        std::tie(dq.front().arrival, dq.front().flow_id, dq.front().packet) <
                            std::tie(queues[static_cast<std::size_t>(best_q)].front().arrival,
                                     queues[static_cast<std::size_t>(best_q)].front().flow_id,
                                     queues[static_cast<std::size_t>(best_q)].front().packet))
                        best_q = q;
                }
                // No lookahead: the oldest head either fits or blocks the port.
                if (best_q >= 0 &&
                    queues[static_cast<std::size_t>(best_q)].front().service <= residual) {
                    pick = queues[static_cast<std::size_t>(best_q)].front();
                    queues[static_cast<std::size_t>(best_q)].pop_front();
                }
                break;
            }
            case BePolicy::Dqs: {
                estimator_epoch(t);
                PortSnapshot snap;
                for (std::size_t i = 0; i < be_queues.size(); ++i) {
                    const auto& dq = queues[static_cast<std::size_t>(be_queues[i])];
                    QueueState qs;
                    qs.index = static_cast<int>(i);
                    qs.backlog = static_cast<int>(dq.size());
                    qs.head_service_time = dq.empty() ? 0 : dq.front().service;
                    qs.gate_open = true;
                    snap.queues.push_back(qs);
                }
                const StrategyVector s = select_strategy(snap, uparams, estimator, residual);
                if (s.served() >= 0) {
                    auto& dq = queues[static_cast<std::size_t>(be_queues[static_cast<std::size_t>(s.served())])];
                    pick = dq.front();
                    dq.pop_front();
                }
                break;
            }
        }

        if (pick) {
            transmit(*pick, t);
            continue;
        }
        Tick next = std::min({next_arrival, scenario.horizon});
        if (wi < windows.size()) next = std::min(next, windows[wi].start);
        next = std::min(next, next_ts_row_start(t));
        if (next <= t) break;  // nothing left to happen
        t = next;
    }

    std::sort(log.begin(), log.end(), [](const Event& a, const Event& b) {
        return std::tuple(a.time, detail::event_rank(a.kind), a.flow_id, a.packet, a.queue) <
               std::tuple(b.time, detail::event_rank(b.kind), b.flow_id, b.packet, b.queue);
    });

    MetricsReport rep = compute_metrics(log, scenario);
    for (FlowMetrics& m : rep.flows) {
        std::int64_t live = 0;
        for (const auto& q : queues)
            for (const auto& p : q)
                if (p.flow_id == m.flow_id) ++live;
        m.queued_at_end = live;
    }
    return {std::move(log), std::move(rep)};
}

// ---- exports --------------------------------------------------------------

inline std::string event_log_to_csv(const EventLog& log) {
    std::ostringstream os;
    os << "time_ns,event,flow_id,packet_index,queue\n";
    for (const Event& e : log)
        os << e.time << ',' << to_string(e.kind) << ',' << e.flow_id << ',' << e.packet << ','
           << e.queue << '\n';
    return os.str();
}

inline nlohmann::json metrics_to_json(const MetricsReport& rep) {
    nlohmann::json j;
    j["horizon_ns"] = rep.horizon;
    j["utilization"] = rep.utilization;
    j["ts_utilization"] = rep.ts_utilization;
    j["be_utilization"] = rep.be_utilization;
    j["misses"] = rep.misses;
    j["drops_per_queue"] = rep.drops_per_queue;
    j["flows"] = nlohmann::json::array();
    for (const FlowMetrics& m : rep.flows)
        j["flows"].push_back({{"flow_id", m.flow_id},
                              {"class", m.cls == FlowClass::TimeSensitive ? "TS" : "BE"},
                              {"arrived", m.arrived},
                              {"transmitted", m.transmitted},
                              {"dropped", m.dropped},
                              {"queued_at_end", m.queued_at_end},
                              {"delay_min_ns", m.delay_min},
                              {"delay_max_ns", m.delay_max},
                              {"delay_mean_ns", m.delay_mean},
                              {"jitter_ns", m.jitter}});
    return j;
}

inline std::string metrics_to_csv(const MetricsReport& rep) {
    std::ostringstream os;
    os << "flow_id,class,arrived,transmitted,dropped,queued_at_end,delay_min_ns,delay_max_ns,"
          "delay_mean_ns,jitter_ns\n";
    for (const FlowMetrics& m : rep.flows)
        os << m.flow_id << ',' << (m.cls == FlowClass::TimeSensitive ? "TS" : "BE") << ','
           << m.arrived << ',' << m.transmitted << ',' << m.dropped << ',' << m.queued_at_end << ','
           << m.delay_min << ',' << m.delay_max << ',' << m.delay_mean << ',' << m.jitter << '\n';
    return os.str();
}

inline nlohmann::json scenario_to_json(const Scenario& sc) {
    nlohmann::json j;
    j["flowset"] = serialize_flowset(sc.flowset);
    j["schedule"] = schedule_to_json(sc.schedule);
    j["policy"] = to_string(sc.policy);
    j["seed"] = sc.seed;
    j["horizon_ns"] = sc.horizon;
    j["be_load"] = sc.be_load;
    j["be_size_min"] = sc.be_size_min;
    j["be_size_max"] = sc.be_size_max;
    if (!sc.utility.c.empty()) j["utility"] = utility_params_to_json(sc.utility);
    if (!sc.be_trace.empty()) {
        j["be_trace"] = nlohmann::json::array();
        for (const BeTraceEntry& e : sc.be_trace)
            j["be_trace"].push_back(
                {{"time_ns", e.time}, {"flow_id", e.flow_id}, {"size_bytes", e.size_bytes}});
    }
    return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
    static const std::set<std::string> keys = {"flowset", "schedule", "policy", "seed",
                                               "horizon_ns", "be_load", "be_size_min",
                                               "be_size_max", "utility", "be_trace"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!keys.count(it.key())) throw SpecError("unknown key \"" + it.key() + "\" in scenario");
    Scenario sc;
    sc.flowset = flowset_from_json(j.at("flowset"));
    if (j.contains("schedule")) sc.schedule = schedule_from_json(j.at("schedule"));
    sc.policy = be_policy_from_string(j.at("policy").get<std::string>());
    sc.seed = j.at("seed").get<std::uint64_t>();
    sc.horizon = j.at("horizon_ns").get<Tick>();
    if (j.contains("be_load")) sc.be_load = j.at("be_load").get<double>();
    if (j.contains("be_size_min")) sc.be_size_min = j.at("be_size_min").get<int>();
    if (j.contains("be_size_max")) sc.be_size_max = j.at("be_size_max").get<int>();
    if (j.contains("utility")) sc.utility = utility_params_from_json(j.at("utility"));
    if (j.contains("be_trace"))
        for (const auto& e : j.at("be_trace"))
            sc.be_trace.push_back({e.at("time_ns").get<Tick>(), e.at("flow_id").get<int>(),
                                   e.at("size_bytes").get<std::int64_t>()});
    return sc;
}

} // namespace portsched
