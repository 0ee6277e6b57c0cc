// Library walkthrough: analyze a small co-prime flow set, predict its
// colliding packets, relax it into a conflict-free per-packet schedule, and
// render the gate control list.
#include <iostream>

#include "portsched/portsched.hpp"

using namespace portsched;

namespace {

Flow make_flow(int id, Tick period, Tick service, Tick offset, Tick jitter_bound) {
    Flow f;
    f.id = id;
    f.period = period;
    f.size_bytes = service / 8;  // 1 Gbit/s: 8 ns per byte
    f.service_time = service;
    f.arrival = offset;
    f.initial_offset = offset;
    f.delay_bound = period * 20;
    f.jitter_bound = jitter_bound;
    return f;
}

} // namespace

int main() {
    const std::vector<Flow> flows = {
        make_flow(0, 14, 3, 0, 50),
        make_flow(1, 27, 3, 5, 50),
        make_flow(2, 61, 4, 9, 50),
    };
    const std::vector<Tick> offsets = {0, 5, 9};

    const ExistencePrediction pred = predict_existence(flows);
    std::cout << "co-prime periods, CFK certain: " << std::boolalpha << pred.cfk_certain << "\n";

    const ConflictSolutionSpace space = cfk_solution_space(flows, offsets);
    std::cout << "all-flow collision indices: ";
    for (std::size_t i = 0; i < space.base.size(); ++i)
        std::cout << to_string(space.base[i]) << "+k*" << to_string(space.step[i]) << " ";
    std::cout << "\nfirst collision at t = "
              << to_string(space_collision_time(space, flows, offsets, 0)) << "\n";

    const ConflictList conflicts = brute_force_conflicts(flows, offsets, 23058);
    std::cout << "pairwise conflicts per hyperperiod: " << conflicts.size() << "\n";

    const ScheduleResult result = compute_static_schedule(flows);
    std::cout << "relaxed schedule: " << (result.verdict.schedulable ? "ok" : "failed") << ", "
              << result.schedule.table.size() << " windows per cycle\n";

    FlowSet fs;
    fs.flows = flows;
    const GateControlList gcl =
        emit_gcl(result.schedule, flows, assign_queues(fs), fs.link.queue_count);
    std::cout << "GCL rows: " << gcl.rows.size() << ", cycle " << gcl.cycle << " ns\n";
    return result.verdict.schedulable ? 0 : 1;
}
