// Workload generation for the canonical industrial profiles (periodic TS
// flows at 0.5/2/5 ms plus stochastic best-effort load) and the experiment
// harness comparing the gated policies against the strict-priority
// benchmark.
#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "portsched/flow.hpp"
#include "portsched/nds.hpp"
#include "portsched/rng.hpp"
#include "portsched/simulator.hpp"
#include "portsched/ticks.hpp"

namespace portsched {

inline const std::vector<Tick>& workload_periods() {
    static const std::vector<Tick> periods = {500'000, 2'000'000, 5'000'000};
    return periods;
}

// Per-period flow counts for the canonical totals.
inline std::vector<int> workload_split(int ts_count) {
    static const std::map<int, std::vector<int>> table = {
        {5, {2, 2, 1}}, {20, {6, 7, 7}}, {50, {16, 17, 17}}, {100, {33, 33, 34}}};
    auto it = table.find(ts_count);
    if (it == table.end())
        throw SpecError("no canonical split for " + std::to_string(ts_count) +
                        " flows; pass explicit per-period counts");
    return it->second;
}

// TS flows with sizes uniform in [64, 512] B and first arrivals uniform in
// [0, T); optional BE sources on the remaining queues. Deterministic in the
// seed.
inline FlowSet generate_workload(int ts_count, std::uint64_t seed, double be_load = 0.0,
                                 EdgeSpec edge = {}, std::vector<int> split = {}) {
    if (ts_count < 1) throw SpecError("workload needs at least one TS flow");
    if (split.empty()) split = workload_split(ts_count);
    if (split.size() != workload_periods().size())
        throw SpecError("per-period counts must cover every period class");
    int total = 0;
    for (int c : split) total += c;
    if (total != ts_count) throw SpecError("per-period counts must sum to the flow count");

    FlowSet fs;
    fs.link = edge;
    Rng rng(seed);
    int id = 0;
    for (std::size_t c = 0; c < split.size(); ++c) {
        const Tick period = workload_periods()[c];
        for (int k = 0; k < split[c]; ++k) {
            Flow f;
            f.id = id++;
            f.cls = FlowClass::TimeSensitive;
            f.period = period;
            f.size_bytes = rng.uniform_i64(64, 512);
            f.service_time = service_time(f.size_bytes, fs.link.rate_bps);
            f.arrival = rng.uniform_i64(0, period - 1);
            f.initial_offset = f.arrival;
            f.delay_bound = period;
            f.jitter_bound = 0;
            fs.flows.push_back(f);
        }
    }

    if (be_load > 0) {
        const int ts_classes = static_cast<int>(workload_periods().size());
        const int be_sources = fs.link.queue_count - ts_classes;
        if (be_sources < 1) throw SpecError("no queue left for best-effort sources");
        for (int s = 0; s < be_sources; ++s) {
            Flow f;
            f.id = id++;
            f.cls = FlowClass::BestEffort;
            f.priority = s;
            fs.flows.push_back(f);
        }
    }
    return fs;
}

inline Scenario make_scenario(FlowSet fs, Schedule sched, BePolicy policy, Tick horizon,
                              std::uint64_t seed, double be_load) {
    Scenario sc;
    sc.flowset = std::move(fs);
    sc.schedule = std::move(sched);
    sc.policy = policy;
    sc.horizon = horizon;
    sc.seed = seed;
    sc.be_load = be_load;
    return sc;
}

// ---- experiment harness ----------------------------------------------------

struct ExperimentSpec {
    std::vector<int> counts = {5, 20, 50, 100};
    std::vector<std::uint64_t> seeds = [] {
        std::vector<std::uint64_t> s;
        for (std::uint64_t i = 1; i <= 20; ++i) s.push_back(i);
        return s;
    }();
    double be_load = 0.5;
    std::vector<std::string> policies = {"sp", "nds_dqs", "nds_fifo"};
    Tick horizon_cycles = 2;

    void validate() const {
        if (counts.empty() || seeds.empty()) throw SpecError("experiment needs counts and seeds");
        if (be_load < 0 || be_load > 1) throw SpecError("be_load must lie in [0, 1]");
    }
};

struct ExperimentRow {
    int count = 0;
    std::uint64_t seed = 0;
    std::string policy;
    bool schedulable = false;
    double synth_ms = 0;  // NDS synthesis wall time; 0 for the sp benchmark
    double utilization = 0;
    Tick ts_delay_max = 0;
    Tick ts_jitter_max = 0;
    std::int64_t be_drops = 0;
    std::int64_t be_transmitted = 0;
    std::string error;
};

struct ExperimentFlowRow {
    int count = 0;
    std::uint64_t seed = 0;
    std::string policy;
    int flow_id = 0;
    FlowClass cls = FlowClass::TimeSensitive;
    Tick delay_min = 0, delay_max = 0;
    double delay_mean = 0;
    Tick jitter = 0;
};

struct ExperimentResult {
    std::vector<ExperimentRow> rows;
    std::vector<ExperimentFlowRow> flow_rows;
};

inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    ExperimentResult out;

    for (int count : spec.counts) {
        for (std::uint64_t seed : spec.seeds) {
            FlowSet fs = generate_workload(count, seed, spec.be_load);
            std::vector<Flow> ts = fs.ts_flows();

            Schedule nds_schedule;
            ScheduleVerdict verdict;
            double synth_ms = 0;
            bool admitted = admission_check(ts, fs.link);
            if (admitted) {
                const auto t0 = std::chrono::steady_clock::now();
                ScheduleResult r = compute_static_schedule(ts);
                synth_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - t0)
                               .count();
                nds_schedule = std::move(r.schedule);
                verdict = std::move(r.verdict);
            }

            for (const std::string& policy : spec.policies) {
                ExperimentRow row;
                row.count = count;
                row.seed = seed;
                row.policy = policy;
                try {
                    Scenario sc;
                    if (policy == "sp") {
                        sc = make_scenario(fs, Schedule{}, BePolicy::StrictPriority,
                                           spec.horizon_cycles * 10'000'000, seed, spec.be_load);
                        row.schedulable = true;
                    } else if (policy == "nds_dqs" || policy == "nds_fifo") {
                        row.synth_ms = synth_ms;
                        row.schedulable = admitted && verdict.schedulable;
                        if (!row.schedulable) {
                            row.error = "unschedulable";
                            out.rows.push_back(row);
                            continue;
                        }
                        sc = make_scenario(fs, nds_schedule,
                                           policy == "nds_dqs" ? BePolicy::Dqs
                                                               : BePolicy::ResidualFifo,
                                           spec.horizon_cycles * nds_schedule.cycle, seed,
                                           spec.be_load);
                    } else {
                        throw SpecError("unknown experiment policy \"" + policy + "\"");
                    }
                    auto [log, rep] = run_simulation(sc);
                    row.utilization = rep.utilization;
                    for (const FlowMetrics& m : rep.flows) {
                        if (m.cls == FlowClass::TimeSensitive) {
                            row.ts_delay_max = std::max(row.ts_delay_max, m.delay_max);
                            row.ts_jitter_max = std::max(row.ts_jitter_max, m.jitter);
                        } else {
                            row.be_drops += m.dropped;
                            row.be_transmitted += m.transmitted;
                        }
                        out.flow_rows.push_back({count, seed, policy, m.flow_id, m.cls,
                                                 m.delay_min, m.delay_max, m.delay_mean, m.jitter});
                    }
                } catch (const Error& e) {
                    row.error = e.what();
                }
                out.rows.push_back(row);
            }
        }
    }
    // Canonical order regardless of execution order.
    std::sort(out.rows.begin(), out.rows.end(), [](const ExperimentRow& a, const ExperimentRow& b) {
        return std::tie(a.count, a.seed, a.policy) < std::tie(b.count, b.seed, b.policy);
    });
    std::sort(out.flow_rows.begin(), out.flow_rows.end(),
              [](const ExperimentFlowRow& a, const ExperimentFlowRow& b) {
                  return std::tie(a.count, a.seed, a.policy, a.flow_id) <
                         std::tie(b.count, b.seed, b.policy, b.flow_id);
              });
    return out;
}

inline std::string experiment_to_csv(const std::vector<ExperimentRow>& rows) {
    std::ostringstream os;
    os << "count,seed,policy,schedulable,synth_ms,utilization,ts_delay_max_ns,ts_jitter_max_ns,"
          "be_drops,be_transmitted,error\n";
    for (const ExperimentRow& r : rows)
        os << r.count << ',' << r.seed << ',' << r.policy << ',' << (r.schedulable ? 1 : 0) << ','
           << r.synth_ms << ',' << r.utilization << ',' << r.ts_delay_max << ',' << r.ts_jitter_max
           << ',' << r.be_drops << ',' << r.be_transmitted << ',' << r.error << '\n';
    return os.str();
}

inline std::string experiment_flows_to_csv(const std::vector<ExperimentFlowRow>& rows) {
    std::ostringstream os;
    os << "count,seed,policy,flow_id,class,delay_min_ns,delay_max_ns,delay_mean_ns,jitter_ns\n";
    for (const ExperimentFlowRow& r : rows)
        os << r.count << ',' << r.seed << ',' << r.policy << ',' << r.flow_id << ','
           << (r.cls == FlowClass::TimeSensitive ? "TS" : "BE") << ',' << r.delay_min << ','
           << r.delay_max << ',' << r.delay_mean << ',' << r.jitter << '\n';
    return os.str();
}

} // namespace portsched
