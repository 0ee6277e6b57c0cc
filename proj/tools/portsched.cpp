// Command-line front end: combinability analysis, conflict prediction,
// schedule synthesis, single-port simulation, and the canonical experiment
// suite. Exit codes: 0 success, 1 domain failure (unschedulable), 2 usage or
// input error.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "portsched/portsched.hpp"

namespace fs = std::filesystem;
using namespace portsched;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError("cannot open \"" + path + "\"");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const fs::path& dir, const std::string& name, const std::string& content) {
    fs::create_directories(dir);
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write \"" + (dir / name).string() + "\"");
    out << content;
}

FlowSet load_flowset(const std::string& path) {
    FlowSet fsin = parse_flowset(read_file(path));
    if (fsin.flows.empty()) throw SpecError("flow set \"" + path + "\" contains no flows");
    return fsin;
}

std::vector<Tick> emergence_offsets(const std::vector<Flow>& flows) {
    std::vector<Tick> o;
    for (const Flow& f : flows) o.push_back(f.emergence());
    return o;
}

std::string wide_str(Wide v) { return portsched::to_string(v); }

int cmd_analyze(const std::string& input, const std::string& out_dir, bool as_json) {
    FlowSet fsin = load_flowset(input);
    std::vector<Flow> ts = fsin.ts_flows();
    if (ts.empty()) throw SpecError("flow set has no TS flows to analyze");

    std::vector<Tick> periods;
    Tick sum_tau = 0;
    for (const Flow& f : ts) {
        periods.push_back(f.period);
        sum_tau += f.service_time;
    }
    const Tick g = gcd_periods(periods);
    const Wide l = hyperperiod(periods);
    const bool ideal = ts.size() < 2 || (g > 1 && sum_tau < g);

    nlohmann::json rep;
    rep["ts_flows"] = ts.size();
    rep["gcd_ns"] = g;
    rep["sum_service_ns"] = sum_tau;
    rep["hyperperiod_ns"] = wide_str(l);
    rep["ideal_path_available"] = ideal;

    std::cout << "flows: " << ts.size() << " TS, " << fsin.flows.size() - ts.size() << " BE\n";
    std::cout << "gcd of periods: " << g << " ns, total service time: " << sum_tau << " ns\n";
    std::cout << "hyperperiod: " << wide_str(l) << " ns\n";

    if (ts.size() >= 2) {
        const ExistencePrediction pred = predict_existence(ts);
        rep["cfk_certain"] = pred.cfk_certain;
        rep["csk_certain"] = pred.csk_certain;
        std::cout << "CFK certain (gcd = 1): " << (pred.cfk_certain ? "yes" : "no") << "\n";
        std::cout << "CSK certain (gcd = 1 and some service time > 1): "
                  << (pred.csk_certain ? "yes" : "no") << "\n";
        if (pred.cfk_certain) {
            ConflictSolutionSpace space = cfk_solution_space(ts, emergence_offsets(ts));
            if (space.exists) {
                std::string base, step;
                for (std::size_t i = 0; i < space.base.size(); ++i) {
                    base += (i ? ", " : "") + wide_str(space.base[i]);
                    step += (i ? ", " : "") + wide_str(space.step[i]);
                }
                std::cout << "simultaneous collision space: base (" << base << "), step (" << step
                          << ")\n";
                std::cout << "first common collision at t = "
                          << wide_str(space_collision_time(space, ts, emergence_offsets(ts), 0))
                          << " ns\n";
                rep["cfk_space_base"] = base;
                rep["cfk_space_step"] = step;
            } else {
                std::cout << "no simultaneous all-flow collision space (chain unsolvable)\n";
            }
        }
    }
    std::cout << "ideal path available: " << (ideal ? "yes" : "no");
    if (ideal && ts.size() >= 2)
        std::cout << " (g = " << g << " ns, sum of service times " << sum_tau << " < g)";
    std::cout << "\n";

    if (as_json) std::cout << rep.dump(2) << "\n";
    if (!out_dir.empty()) write_file(out_dir, "analysis.json", rep.dump(2) + "\n");
    return 0;
}

int cmd_predict(const std::string& input, const std::string& out_dir, Tick horizon, bool brute) {
    FlowSet fsin = load_flowset(input);
    std::vector<Flow> ts = fsin.ts_flows();
    if (ts.size() < 2) throw SpecError("conflict prediction needs at least two TS flows");

    std::vector<Tick> periods;
    for (const Flow& f : ts) periods.push_back(f.period);
    if (horizon <= 0) horizon = hyperperiod_ticks(periods);

    const std::vector<Tick> offsets = emergence_offsets(ts);
    const ConflictList list = brute ? brute_force_conflicts(ts, offsets, horizon)
                                    : predicted_conflicts(ts, offsets, horizon);
    write_file(out_dir, "conflicts.csv", conflict_list_to_csv(list));
    write_file(out_dir, "conflicts.json", conflict_list_to_json(list).dump(2) + "\n");
    std::cout << list.size() << " conflicts within horizon " << horizon << " ns ("
              << (brute ? "brute-force" : "predicted") << ")\n";
    return 0;
}

int cmd_schedule(const std::string& input, const std::string& out_dir, double timeout_s,
                 Tick hyperperiod_cap) {
    FlowSet fsin = load_flowset(input);
    std::vector<Flow> ts = fsin.ts_flows();
    if (ts.empty()) throw SpecError("flow set has no TS flows to schedule");

    ScheduleLimits limits;
    if (timeout_s > 0) limits.timeout_s = timeout_s;
    if (hyperperiod_cap > 0) limits.hyperperiod_cap = hyperperiod_cap;

    ScheduleVerdict verdict;
    Schedule sched;
    std::string failure;
    if (!admission_check(ts, fsin.link)) {
        verdict.schedulable = false;
        verdict.violations.push_back(
            {ViolationKind::Bandwidth, -1, -1, 0, "total TS bandwidth exceeds the edge rate"});
    } else {
        try {
            ScheduleResult r = compute_static_schedule(ts, emergence_offsets(ts),
                                                       JitterConstraintSet::from_flows(ts),
                                                       std::vector<Tick>(ts.size(), 0), limits);
            sched = std::move(r.schedule);
            verdict = verify_schedule(sched, ts, JitterConstraintSet::from_flows(ts), fsin.link);
            verdict.unsolved = r.verdict.unsolved;
            if (!r.verdict.schedulable) verdict = r.verdict;
        } catch (const OverflowError& e) {
            verdict.schedulable = false;
            verdict.violations.push_back({ViolationKind::Overlap, -1, -1, 0, e.what()});
            failure = e.what();
        }
    }

    write_file(out_dir, "verdict.json", verdict_to_json(verdict).dump(2) + "\n");
    if (!verdict.schedulable) {
        std::cout << "unschedulable";
        if (!failure.empty()) std::cout << ": " << failure;
        std::cout << " (" << verdict.violations.size() << " violations, see verdict.json)\n";
        return 1;
    }

    const QueueAssignment qa = assign_queues(fsin);
    const GateControlList gcl = emit_gcl(sched, fsin.flows, qa, fsin.link.queue_count);
    write_file(out_dir, "schedule.csv", schedule_to_csv(sched, ts));
    write_file(out_dir, "schedule.json", schedule_to_json(sched).dump(2) + "\n");
    write_file(out_dir, "gcl.json", gcl_to_json(gcl).dump(2) + "\n");
    write_file(out_dir, "gcl.csv", gcl_to_csv(gcl));
    std::cout << "schedulable: " << (sched.mode == ScheduleMode::IdealOffsets ? "ideal offsets"
                                                                              : "per-packet table")
              << ", cycle " << sched.cycle << " ns, outputs in " << out_dir << "\n";
    return 0;
}

int cmd_simulate(const std::string& input, const std::string& scenario_path, int generate_count,
                 const std::string& out_dir, const std::string& policy_name, double be_load,
                 Tick horizon_cycles, Tick horizon_ns, std::uint64_t seed, double timeout_s,
                 Tick hyperperiod_cap) {
    Scenario sc;
    if (!scenario_path.empty()) {
        try {
            sc = scenario_from_json(nlohmann::json::parse(read_file(scenario_path)));
        } catch (const nlohmann::json::exception& e) {
            throw SpecError(std::string("malformed scenario JSON: ") + e.what());
        }
    } else {
        FlowSet fsin;
        if (generate_count > 0)
            fsin = generate_workload(generate_count, seed, be_load);
        else if (!input.empty())
            fsin = load_flowset(input);
        else
            throw SpecError("simulate needs --scenario, --input, or --generate");

        sc.flowset = std::move(fsin);
        sc.policy = be_policy_from_string(policy_name);
        sc.seed = seed;
        sc.be_load = be_load;

        std::vector<Flow> ts = sc.flowset.ts_flows();
        if (sc.policy != BePolicy::StrictPriority && !ts.empty()) {
            ScheduleLimits limits;
            if (timeout_s > 0) limits.timeout_s = timeout_s;
            if (hyperperiod_cap > 0) limits.hyperperiod_cap = hyperperiod_cap;
            ScheduleResult r = compute_static_schedule(ts, emergence_offsets(ts),
                                                       JitterConstraintSet::from_flows(ts),
                                                       std::vector<Tick>(ts.size(), 0), limits);
            if (!r.verdict.schedulable) {
                std::cout << "unschedulable flow set; cannot build a gated scenario\n";
                return 1;
            }
            sc.schedule = std::move(r.schedule);
        }
        sc.horizon = horizon_ns > 0
                         ? horizon_ns
                         : horizon_cycles * (sc.schedule.empty() ? 10'000'000 : sc.schedule.cycle);
    }

    auto [log, rep] = run_simulation(sc);
    write_file(out_dir, "events.csv", event_log_to_csv(log));
    write_file(out_dir, "metrics.json", metrics_to_json(rep).dump(2) + "\n");
    write_file(out_dir, "metrics.csv", metrics_to_csv(rep));
    write_file(out_dir, "scenario.json", scenario_to_json(sc).dump(2) + "\n");

    Tick ts_jitter = 0;
    for (const FlowMetrics& m : rep.flows)
        if (m.cls == FlowClass::TimeSensitive) ts_jitter = std::max(ts_jitter, m.jitter);
    std::cout << "horizon " << sc.horizon << " ns, utilization " << rep.utilization
              << ", max TS jitter " << ts_jitter << " ns, misses " << rep.misses
              << ", outputs in " << out_dir << "\n";
    return 0;
}

int cmd_experiment(const std::string& out_dir, const std::vector<int>& counts, int num_seeds,
                   const std::vector<std::uint64_t>& seed_list, double be_load,
                   const std::vector<std::string>& policies, Tick horizon_cycles) {
    ExperimentSpec spec;
    if (!counts.empty()) spec.counts = counts;
    if (!seed_list.empty()) {
        spec.seeds = seed_list;
    } else if (num_seeds > 0) {
        spec.seeds.clear();
        for (std::uint64_t s = 1; s <= static_cast<std::uint64_t>(num_seeds); ++s)
            spec.seeds.push_back(s);
    }
    if (be_load >= 0) spec.be_load = be_load;
    if (!policies.empty()) spec.policies = policies;
    if (horizon_cycles > 0) spec.horizon_cycles = horizon_cycles;

    ExperimentResult result = run_experiment(spec);
    write_file(out_dir, "experiment.csv", experiment_to_csv(result.rows));
    write_file(out_dir, "experiment_flows.csv", experiment_flows_to_csv(result.flow_rows));

    std::size_t failed = 0;
    for (const ExperimentRow& r : result.rows)
        if (!r.error.empty()) ++failed;
    std::cout << result.rows.size() << " runs (" << failed << " failed), outputs in " << out_dir
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic scheduling toolkit for time-sensitive egress ports"};
    app.require_subcommand(1);

    std::string input, scenario_path, out_dir = "out", policy = "dqs";
    bool as_json = false, brute = false;
    double be_load = 0.5, timeout_s = 10.0;
    Tick horizon_cycles = 10, horizon_ns = 0, predict_horizon = 0, hyperperiod_cap = 0;
    std::uint64_t seed = 1;
    int generate_count = 0, num_seeds = 0;
    std::vector<int> counts;
    std::vector<std::uint64_t> seed_list;
    std::vector<std::string> policies;

    CLI::App* analyze = app.add_subcommand("analyze", "combinability report for a flow set");
    analyze->add_option("--input", input, "FlowSet JSON file")->required();
    analyze->add_flag("--json", as_json, "print the report as JSON");
    std::string analyze_out;
    analyze->add_option("--out-dir", analyze_out, "also write analysis.json here");

    CLI::App* predict = app.add_subcommand("predict", "enumerate colliding packets");
    predict->add_option("--input", input, "FlowSet JSON file")->required();
    predict->add_option("--out-dir", out_dir, "output directory");
    predict->add_option("--horizon", predict_horizon, "prediction horizon in ns (default: hyperperiod)");
    predict->add_flag("--brute", brute, "use the brute-force oracle instead of the solution spaces");

    CLI::App* schedule = app.add_subcommand("schedule", "synthesize a static schedule and GCL");
    schedule->add_option("--input", input, "FlowSet JSON file")->required();
    schedule->add_option("--out-dir", out_dir, "output directory");
    schedule->add_option("--timeout-s", timeout_s, "search timeout in seconds");
    schedule->add_option("--hyperperiod-cap", hyperperiod_cap, "hyperperiod cap in ticks");

    CLI::App* simulate = app.add_subcommand("simulate", "run the single-port simulator");
    simulate->add_option("--input", input, "FlowSet JSON file");
    simulate->add_option("--scenario", scenario_path, "scenario JSON file");
    simulate->add_option("--generate", generate_count, "generate a canonical workload of N TS flows");
    simulate->add_option("--out-dir", out_dir, "output directory");
    simulate->add_option("--policy", policy, "BE policy: dqs, fifo, or sp");
    simulate->add_option("--be-load", be_load, "offered BE load as a fraction of link rate");
    simulate->add_option("--horizon-cycles", horizon_cycles, "horizon in GCL cycles");
    simulate->add_option("--horizon-ns", horizon_ns, "horizon in ns (overrides cycles)");
    simulate->add_option("--seed", seed, "random seed");
    simulate->add_option("--timeout-s", timeout_s, "schedule search timeout in seconds");
    simulate->add_option("--hyperperiod-cap", hyperperiod_cap, "hyperperiod cap in ticks");

    CLI::App* experiment = app.add_subcommand("experiment", "run the canonical comparison suite");
    experiment->add_option("--out-dir", out_dir, "output directory");
    experiment->add_option("--counts", counts, "TS flow counts");
    experiment->add_option("--num-seeds", num_seeds, "use seeds 1..N");
    experiment->add_option("--seeds", seed_list, "explicit seed list");
    experiment->add_option("--be-load", be_load, "offered BE load fraction");
    experiment->add_option("--policies", policies, "policies: sp, nds_dqs, nds_fifo");
    experiment->add_option("--horizon-cycles", horizon_cycles, "simulated cycles per run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(analyze)) return cmd_analyze(input, analyze_out, as_json);
        if (app.got_subcommand(predict)) return cmd_predict(input, out_dir, predict_horizon, brute);
        if (app.got_subcommand(schedule)) return cmd_schedule(input, out_dir, timeout_s, hyperperiod_cap);
        if (app.got_subcommand(simulate))
            return cmd_simulate(input, scenario_path, generate_count, out_dir, policy, be_load,
                                horizon_cycles, horizon_ns, seed, timeout_s, hyperperiod_cap);
        if (app.got_subcommand(experiment))
            return cmd_experiment(out_dir, counts, num_seeds, seed_list, be_load, policies,
                                  horizon_cycles);
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
