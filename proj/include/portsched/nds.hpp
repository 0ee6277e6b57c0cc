// Non-collision deterministic scheduling: admission control, the
// non-conflict time-offset search, set partitioning, per-packet conflict
// elimination with jitter relaxation, GCL emission, and an independent
// schedule verifier.
#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "portsched/combinability.hpp"
#include "portsched/flow.hpp"
#include "portsched/schedule.hpp"
#include "portsched/ticks.hpp"

namespace portsched {

struct JitterConstraintSet {
    std::vector<Tick> delay_bound;
    std::vector<Tick> jitter_bound;

    static JitterConstraintSet from_flows(const std::vector<Flow>& flows) {
        JitterConstraintSet c;
        for (const Flow& f : flows) {
            c.delay_bound.push_back(f.delay_bound);
            c.jitter_bound.push_back(f.jitter_bound);
        }
        return c;
    }

    void validate(std::size_t n) const {
        if (delay_bound.size() != n || jitter_bound.size() != n)
            throw SpecError("constraint set size must match flow count");
        for (std::size_t i = 0; i < n; ++i) {
            if (delay_bound[i] < 0 || jitter_bound[i] < 0)
                throw SpecError("constraint bounds must be non-negative");
            if (jitter_bound[i] > delay_bound[i])
                throw SpecError("jitter bound exceeds delay bound");
        }
    }
};

// Sum of TS flow bandwidths must not exceed the edge rate. Exact integer
// comparison over one hyperperiod when it is representable, long-double
// fallback otherwise.
inline bool admission_check(const std::vector<Flow>& flows, const EdgeSpec& edge) {
    if (flows.empty()) return true;
    std::vector<Tick> periods;
    for (const Flow& f : flows) {
        if (!f.is_ts()) throw SpecError("admission check applies to TS flows");
        periods.push_back(f.period);
    }
    try {
        const Wide l = hyperperiod(periods);
        Wide bits = 0;  // bits offered per hyperperiod, scaled by 1e9
        for (const Flow& f : flows)
            bits = checked_add_wide(
                bits, checked_mul_wide(static_cast<Wide>(f.size_bytes) * 8 * 1'000'000'000,
                                       l / f.period));
        return bits <= checked_mul_wide(static_cast<Wide>(edge.rate_bps), l);
    } catch (const OverflowError&) {
        long double sum = 0;
        for (const Flow& f : flows) sum += static_cast<long double>(flow_bandwidth(f));
        return sum <= static_cast<long double>(edge.rate_bps);
    }
}

struct OffsetResult {
    std::vector<Tick> offsets;          // residues, each < T_i
    std::vector<Tick> first_departure;  // emergence + minimal circular delay
    int unsolved = 0;                   // S flag
    std::string detail;
};

struct ScheduleLimits {
    Tick hyperperiod_cap = 10'000'000'000;  // ticks
    double timeout_s = 10.0;
};

namespace detail {

// Non-overlapping segments on a circle of `cycle` ticks; wrapping segments
// are split at insertion.
class CircularIntervals {
public:
    explicit CircularIntervals(Tick cycle) : cycle_(cycle) {}

    void insert(Tick start, Tick len) {
        start = mod_pos(start, cycle_);
        if (start + len <= cycle_) {
            segs_.emplace(start, start + len);
        } else {
            segs_.emplace(start, cycle_);
            segs_.emplace(0, start + len - cycle_);
        }
    }

    // Largest shift needed to clear every segment currently overlapping
    // [start, start+len); nullopt when the window is free.
    std::optional<Tick> clearing_shift(Tick start, Tick len) const {
        start = mod_pos(start, cycle_);
        Tick best = 0;
        auto scan = [&](Tick qs, Tick qe, Tick wrap) {
            auto it = segs_.upper_bound(qs);
            if (it != segs_.begin()) {
                auto prev = std::prev(it);
                if (prev->second > qs) best = std::max(best, prev->second + wrap - start);
            }
            for (; it != segs_.end() && it->first < qe; ++it)
                best = std::max(best, it->second + wrap - start);
        };
        scan(start, std::min<Tick>(start + len, cycle_), 0);
        if (start + len > cycle_) scan(0, start + len - cycle_, cycle_);
        if (best == 0) return std::nullopt;
        return best;
    }

private:
    Tick cycle_;
    std::multimap<Tick, Tick> segs_;
};

inline bool overlaps_circular(Tick a, Tick la, Tick b, Tick lb, Tick cycle) {
    const Tick d = mod_pos(b - a, cycle);
    return d < la || cycle - d < lb;
}

// Minimal circular delay from the flow's current emergence point such that
// the canonical spacing holds against every peer and, when given, the
// concrete windows over the cycle avoid all reserved slots. Deterministic:
// failures are cleared in peer order, lowest first.
inline std::optional<Tick> search_offset(const std::vector<Flow>& flows,
                                         const std::vector<Tick>& current, std::size_t i,
                                         const std::vector<std::size_t>& peers, Tick g,
                                         const CircularIntervals* reserved, Tick cycle,
                                         Tick span) {
    const Flow& f = flows[i];
    const Tick base = current[i];
    Tick delta = 0;
    while (delta < span) {
        Tick jump = 0;
        for (std::size_t j : peers) {
            if (j == i) continue;
            const Tick d = mod_pos((base + delta) - current[j], g);
            if (d < flows[j].service_time || d > g - f.service_time) {
                jump = d < flows[j].service_time ? flows[j].service_time - d
                                                 : (g - d) + flows[j].service_time;
                break;
            }
        }
        if (jump == 0 && reserved != nullptr) {
            const Tick pos0 = mod_pos(base + delta, cycle);
            for (Tick off = 0; off < cycle; off += f.period) {
                const Tick pos = mod_pos(pos0 + off, cycle);
                if (auto shift = reserved->clearing_shift(pos, f.service_time)) {
                    jump = *shift;
                    break;
                }
            }
        }
        if (jump == 0) return delta;
        delta += jump;
    }
    return std::nullopt;
}

// Processing order of the offset search: ascending period, descending
// service time, ascending id.
inline std::vector<std::size_t> search_order(const std::vector<Flow>& flows,
                                             const std::vector<std::size_t>& members) {
    std::vector<std::size_t> order = members;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tuple(flows[a].period, -flows[a].service_time, flows[a].id) <
               std::tuple(flows[b].period, -flows[b].service_time, flows[b].id);
    });
    return order;
}

} // namespace detail

// Non-conflict time-offset search for a combinable flow set. Preconditions
// (Theorem-3 conditions 1 and 3) are enforced before searching; each offset
// starts at the flow's emergence and advances by the minimal circular delay
// that clears the spacing condition against every other flow.
inline OffsetResult nonconflict_offsets(const std::vector<Flow>& flows,
                                        const std::vector<Tick>& phi,
                                        const JitterConstraintSet& constraints,
                                        const std::vector<Tick>& proc) {
    const std::size_t k = flows.size();
    if (k == 0) throw SpecError("offset search needs at least one flow");
    if (phi.size() != k || proc.size() != k) throw SpecError("phi/processing size mismatch");
    constraints.validate(k);

    std::vector<Tick> periods;
    Tick sum_tau = 0;
    for (const Flow& f : flows) {
        if (!f.is_ts()) throw SpecError("offset search applies to TS flows");
        periods.push_back(f.period);
        sum_tau = checked_add(sum_tau, f.service_time);
    }
    const Tick g = gcd_periods(periods);
    if (k >= 2 && g <= 1) throw SpecError("offset search requires GCD of periods > 1");
    if (k >= 2 && sum_tau >= g)
        throw SpecError("offset search requires total service time below the period gcd");

    OffsetResult res;
    std::vector<Tick> current(k);
    for (std::size_t i = 0; i < k; ++i) current[i] = checked_add(phi[i], proc[i]);
    res.first_departure = current;

    std::vector<std::size_t> all(k);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i : detail::search_order(flows, all)) {
        auto delta = detail::search_offset(flows, current, i, all, g, nullptr, 0, g);
        if (!delta || *delta > constraints.delay_bound[i]) {
            res.unsolved = 1;
            res.detail = "no offset within bounds for flow " + std::to_string(flows[i].id);
            return res;
        }
        current[i] += *delta;
    }
    res.first_departure = current;
    res.offsets.resize(k);
    for (std::size_t i = 0; i < k; ++i) res.offsets[i] = mod_pos(current[i], flows[i].period);
    return res;
}

inline OffsetResult nonconflict_offsets(const std::vector<Flow>& flows) {
    std::vector<Tick> phi, proc;
    for (const Flow& f : flows) {
        phi.push_back(f.initial_offset);
        proc.push_back(f.processing);
    }
    return nonconflict_offsets(flows, phi, JitterConstraintSet::from_flows(flows), proc);
}

// Greedy combinability grouping: seed with the pair of largest usable gcd,
// grow while the group's gcd stays above 1 and the service-time budget
// holds; everything else becomes a singleton.
inline std::vector<std::vector<std::size_t>> partition_flowset(const std::vector<Flow>& flows) {
    std::vector<std::size_t> remaining(flows.size());
    std::iota(remaining.begin(), remaining.end(), 0);
    std::vector<std::vector<std::size_t>> groups;

    while (remaining.size() >= 2) {
        Tick best_g = 1;
        std::pair<std::size_t, std::size_t> seed{0, 0};
        for (std::size_t a = 0; a < remaining.size(); ++a)
            for (std::size_t b = a + 1; b < remaining.size(); ++b) {
                const Flow& fa = flows[remaining[a]];
                const Flow& fb = flows[remaining[b]];
                const Tick g = static_cast<Tick>(gcd_wide(fa.period, fb.period));
                if (g > best_g && fa.service_time + fb.service_time < g) {
                    best_g = g;
                    seed = {a, b};
                }
            }
        if (best_g <= 1) break;

        std::vector<std::size_t> group = {remaining[seed.first], remaining[seed.second]};
        Tick g = best_g;
        Tick sum = flows[group[0]].service_time + flows[group[1]].service_time;
        remaining.erase(remaining.begin() + seed.second);
        remaining.erase(remaining.begin() + seed.first);
        for (;;) {
            Tick cand_g = 1;
            std::size_t cand_pos = remaining.size();
            for (std::size_t p = 0; p < remaining.size(); ++p) {
                const Tick ng = static_cast<Tick>(gcd_wide(g, flows[remaining[p]].period));
                if (ng > cand_g && sum + flows[remaining[p]].service_time < ng) {
                    cand_g = ng;
                    cand_pos = p;
                }
            }
            if (cand_pos == remaining.size()) break;
            g = cand_g;
            sum += flows[remaining[cand_pos]].service_time;
            group.push_back(remaining[cand_pos]);
            remaining.erase(remaining.begin() + cand_pos);
        }
        std::sort(group.begin(), group.end());
        groups.push_back(std::move(group));
    }
    for (std::size_t i : remaining) groups.push_back({i});
    return groups;
}

struct EliminationOutcome {
    bool ok = false;
    std::vector<PacketWindow> table;
    std::vector<Violation> failures;
};

namespace detail {

struct TableRow {
    int flow_pos = 0;  // index into the flow vector
    std::int64_t packet = 0;
    Tick ideal = 0;    // input start; shifts are measured from here
    Tick start = 0;
    Tick len = 0;
};

// Conflict elimination on a steady-state packet table: conflicting packets
// are shifted later by the minimal amount, processed per overlap group in
// EDF order (latest allowed start, then priority, then flow id). Overlap is
// circular modulo the cycle. Shifting into a free gap never creates new
// conflicts, so one pass over the worklist plus a verification sweep
// suffices; the loop and deadline guard the pathological cases.
inline EliminationOutcome eliminate_rows(std::vector<TableRow> rows,
                                         const std::vector<Flow>& flows,
                                         const JitterConstraintSet& constraints, Tick cycle,
                                         std::vector<std::pair<std::size_t, std::size_t>> worklist,
                                         std::chrono::steady_clock::time_point deadline) {
    EliminationOutcome out;
    std::multimap<Tick, std::size_t> index;  // residue position -> row
    Tick max_len = 1;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        index.emplace(mod_pos(rows[r].start, cycle), r);
        max_len = std::max(max_len, rows[r].len);
    }

    auto overlapping_rows = [&](std::size_t r) {
        std::vector<std::size_t> hits;
        const Tick pos = mod_pos(rows[r].start, cycle);
        auto scan = [&](Tick qs, Tick qe) {
            for (auto it = index.lower_bound(qs); it != index.end() && it->first < qe; ++it)
                if (it->second != r &&
                    overlaps_circular(pos, rows[r].len, it->first, rows[it->second].len, cycle))
                    hits.push_back(it->second);
        };
        const Tick lo = pos - (max_len - 1), hi = pos + rows[r].len;
        scan(std::max<Tick>(lo, 0), std::min(hi, cycle));
        if (lo < 0) scan(cycle + lo, cycle);
        if (hi > cycle) scan(0, hi - cycle);
        return hits;
    };

    auto erase_row = [&](std::size_t r) {
        auto range = index.equal_range(mod_pos(rows[r].start, cycle));
        for (auto it = range.first; it != range.second; ++it)
            if (it->second == r) {
                index.erase(it);
                return;
            }
    };

    auto edf_key = [&](std::size_t r) {
        const Flow& f = flows[static_cast<std::size_t>(rows[r].flow_pos)];
        const Tick jb = constraints.jitter_bound[static_cast<std::size_t>(rows[r].flow_pos)];
        const Tick latest = jb >= kNoBound ? kNoBound : rows[r].ideal + jb;
        return std::tuple(latest, f.priority, f.id, rows[r].packet);
    };

    for (int pass = 0; pass < 4; ++pass) {
        std::sort(worklist.begin(), worklist.end(),
                  [&](const auto& a, const auto& b) {
                      return std::min(rows[a.first].start, rows[a.second].start) <
                             std::min(rows[b.first].start, rows[b.second].start);
                  });
        for (const auto& [ra, rb] : worklist) {
            if (std::chrono::steady_clock::now() > deadline) {
                out.failures.push_back({ViolationKind::Overlap, -1, -1, 0, "conflict elimination timed out"});
                return out;
            }
            if (!overlaps_circular(mod_pos(rows[ra].start, cycle), rows[ra].len,
                                   mod_pos(rows[rb].start, cycle), rows[rb].len, cycle))
                continue;  // already resolved

            // Transitive closure of current overlaps around the pair.
            std::set<std::size_t> group{ra, rb};
            std::vector<std::size_t> frontier{ra, rb};
            while (!frontier.empty()) {
                std::size_t r = frontier.back();
                frontier.pop_back();
                for (std::size_t n : overlapping_rows(r))
                    if (group.insert(n).second) frontier.push_back(n);
            }

            std::vector<std::size_t> order(group.begin(), group.end());
            std::sort(order.begin(), order.end(),
                      [&](std::size_t a, std::size_t b) { return edf_key(a) < edf_key(b); });
            for (std::size_t r : order) erase_row(r);
            for (std::size_t r : order) {
                const std::size_t fp = static_cast<std::size_t>(rows[r].flow_pos);
                Tick cand = rows[r].start;
                for (;;) {
                    Tick shift_more = 0;
                    const Tick pos = mod_pos(cand, cycle);
                    const Tick lo = pos - (max_len - 1), hi = pos + rows[r].len;
                    auto filter_scan = [&](Tick qs, Tick qe, Tick wrap) {
                        for (auto it = index.lower_bound(qs); it != index.end() && it->first < qe; ++it)
                            if (overlaps_circular(pos, rows[r].len, it->first,
                                                  rows[it->second].len, cycle))
                                shift_more = std::max(shift_more,
                                                      it->first + rows[it->second].len + wrap - pos);
                    };
                    filter_scan(std::max<Tick>(lo, 0), std::min(hi, cycle), 0);
                    if (lo < 0) filter_scan(cycle + lo, cycle, -cycle);
                    if (hi > cycle) filter_scan(0, hi - cycle, cycle);
                    if (shift_more <= 0) break;
                    cand += shift_more;
                    const Tick total = cand - rows[r].ideal;
                    const Tick jb = constraints.jitter_bound[fp];
                    if (total > jb) {
                        out.failures.push_back({ViolationKind::Jitter, flows[fp].id, rows[r].packet,
                                                rows[r].ideal,
                                                "relaxation exhausted: shift " + std::to_string(total) +
                                                    " exceeds jitter bound " + std::to_string(jb)});
                        return out;
                    }
                    if (total >= cycle) {
                        out.failures.push_back({ViolationKind::Overlap, flows[fp].id, rows[r].packet,
                                                rows[r].ideal, "no free slot within one cycle"});
                        return out;
                    }
                }
                rows[r].start = cand;
                index.emplace(mod_pos(cand, cycle), r);
            }
        }

        // Verification sweep; anything left feeds the next pass.
        std::vector<PacketWindow> check;
        for (std::size_t r = 0; r < rows.size(); ++r)
            check.push_back({static_cast<int>(r), 0, mod_pos(rows[r].start, cycle),
                             mod_pos(rows[r].start, cycle) + rows[r].len});
        auto leftovers = find_window_overlaps(std::move(check), cycle);
        if (leftovers.empty()) {
            out.ok = true;
            for (const TableRow& r : rows)
                out.table.push_back({flows[static_cast<std::size_t>(r.flow_pos)].id, r.packet,
                                     r.start, r.start + r.len});
            std::sort(out.table.begin(), out.table.end(),
                      [](const PacketWindow& a, const PacketWindow& b) {
                          return std::tie(a.start, a.flow_id, a.packet_index) <
                                 std::tie(b.start, b.flow_id, b.packet_index);
                      });
            return out;
        }
        worklist.clear();
        for (const auto& [wa, wb] : leftovers)
            worklist.push_back({static_cast<std::size_t>(wa.flow_id),
                                static_cast<std::size_t>(wb.flow_id)});
    }
    out.failures.push_back({ViolationKind::Overlap, -1, -1, 0, "conflict elimination did not converge"});
    return out;
}

} // namespace detail

// Standalone conflict elimination over a packet table spanning one cycle.
// The input starts are taken as the ideal (zero-jitter) positions.
inline EliminationOutcome eliminate_conflicts(const std::vector<PacketWindow>& table,
                                              const std::vector<Flow>& flows,
                                              const JitterConstraintSet& constraints, Tick cycle,
                                              double timeout_s = 10.0) {
    constraints.validate(flows.size());
    std::vector<detail::TableRow> rows;
    for (const PacketWindow& w : table) {
        int pos = -1;
        for (std::size_t i = 0; i < flows.size(); ++i)
            if (flows[i].id == w.flow_id) pos = static_cast<int>(i);
        if (pos < 0) throw SpecError("table references unknown flow " + std::to_string(w.flow_id));
        rows.push_back({pos, w.packet_index, w.start, w.start, w.end - w.start});
    }
    std::vector<std::pair<std::size_t, std::size_t>> worklist;
    std::vector<PacketWindow> probe;
    for (std::size_t r = 0; r < rows.size(); ++r)
        probe.push_back({static_cast<int>(r), 0, mod_pos(rows[r].start, cycle),
                         mod_pos(rows[r].start, cycle) + rows[r].len});
    for (const auto& [wa, wb] : find_window_overlaps(std::move(probe), cycle))
        worklist.push_back({static_cast<std::size_t>(wa.flow_id), static_cast<std::size_t>(wb.flow_id)});
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::microseconds(static_cast<std::int64_t>(timeout_s * 1e6));
    return detail::eliminate_rows(std::move(rows), flows, constraints, cycle, std::move(worklist),
                                  deadline);
}

namespace detail {

// Overlap/deadline/jitter checks shared by the scheduler and the public
// verifier (bandwidth is the verifier's own extra).
inline ScheduleVerdict verify_core(const Schedule& sched, const std::vector<Flow>& flows,
                                   const JitterConstraintSet& constraints) {
    ScheduleVerdict v;
    if (sched.empty()) {
        if (!flows.empty())
            v.violations.push_back({ViolationKind::Deadline, -1, -1, 0, "no reservations emitted"});
        v.schedulable = v.violations.empty();
        return v;
    }
    constraints.validate(flows.size());

    for (const auto& [wa, wb] : find_window_overlaps(cycle_windows(sched, flows), sched.cycle))
        v.violations.push_back({ViolationKind::Overlap, wa.flow_id, wa.packet_index,
                                std::max(wa.start, wb.start),
                                "window of flow " + std::to_string(wa.flow_id) + " overlaps flow " +
                                    std::to_string(wb.flow_id)});

    auto flow_pos = [&](int id) {
        for (std::size_t i = 0; i < flows.size(); ++i)
            if (flows[i].id == id) return i;
        throw SpecError("schedule references unknown flow " + std::to_string(id));
    };

    if (sched.mode == ScheduleMode::IdealOffsets) {
        for (const FlowDeparture& fd : sched.departures) {
            const std::size_t i = flow_pos(fd.flow_id);
            const Tick e = flows[i].emergence();
            if (fd.first_departure < e)
                v.violations.push_back({ViolationKind::Deadline, fd.flow_id, 0, fd.first_departure,
                                        "departure precedes emergence"});
            else if (fd.first_departure - e > constraints.delay_bound[i])
                v.violations.push_back({ViolationKind::Deadline, fd.flow_id, 0, fd.first_departure,
                                        "offset delay exceeds delay bound"});
            // Ideal mode has constant per-packet delay, so jitter is zero.
        }
    } else {
        std::map<int, std::pair<Tick, Tick>> delay_range;  // flow id -> min/max delay
        for (const PacketWindow& w : sched.table) {
            const std::size_t i = flow_pos(w.flow_id);
            const Flow& f = flows[i];
            const Tick emergence_n = checked_add(f.emergence(), checked_mul(w.packet_index, f.period));
            if (w.start < emergence_n)
                v.violations.push_back({ViolationKind::Deadline, w.flow_id, w.packet_index, w.start,
                                        "window precedes packet emergence"});
            else if (w.start - emergence_n > constraints.delay_bound[i])
                v.violations.push_back({ViolationKind::Deadline, w.flow_id, w.packet_index, w.start,
                                        "start delay exceeds delay bound"});
            const Tick arrival_n = checked_add(f.arrival, checked_mul(w.packet_index, f.period));
            const Tick delay = w.end - arrival_n;
            auto [it, fresh] = delay_range.emplace(w.flow_id, std::pair{delay, delay});
            if (!fresh) {
                it->second.first = std::min(it->second.first, delay);
                it->second.second = std::max(it->second.second, delay);
            }
        }
        for (const auto& [id, range] : delay_range) {
            const std::size_t i = flow_pos(id);
            if (range.second - range.first > constraints.jitter_bound[i])
                v.violations.push_back({ViolationKind::Jitter, id, -1, 0,
                                        "delay spread " + std::to_string(range.second - range.first) +
                                            " exceeds jitter bound"});
        }
    }
    v.schedulable = v.violations.empty();
    return v;
}

// Predicted conflicts between two periodic grids, reduced to steady-state
// packet indices. Returns (packet of a, packet of b) pairs.
inline std::vector<std::pair<std::int64_t, std::int64_t>> predicted_pair_conflicts(
    const Flow& fa, const Flow& fb, Tick da, Tick db, Tick cycle) {
    std::vector<std::pair<std::int64_t, std::int64_t>> hits;
    const Tick g = static_cast<Tick>(gcd_wide(fa.period, fb.period));
    const Tick lcm_ab = fa.period / g * fb.period;
    const std::int64_t occurrences = cycle / lcm_ab;
    const std::int64_t lam_a = cycle / fa.period;
    const std::int64_t lam_b = cycle / fb.period;

    auto add_space = [&](Tick v) {
        DiophantineSolution s =
            extended_bezout(fa.period, fb.period, static_cast<Wide>(db) - da + v);
        auto w = lift_witness(s, fa.period, da);
        if (!w) return;
        for (std::int64_t k = 0; k < occurrences; ++k) {
            const std::int64_t n = w->n + k * (fb.period / g);
            const std::int64_t m = w->m + k * (fa.period / g);
            hits.push_back({n % lam_a, m % lam_b});
        }
    };
    add_space(0);
    for (Tick v = -(fa.service_time - 1); v <= fb.service_time - 1; ++v)
        if (v != 0) add_space(v);
    return hits;
}

} // namespace detail

// Queue layout for the gated port: one TS queue per distinct period class
// starting at queue 0 (shortest period first), best-effort traffic on the
// remaining queues. Excess period classes merge into queue 0.
struct QueueAssignment {
    std::map<int, int> queue_of_flow;
    std::vector<int> ts_queues;
    std::vector<int> be_queues;
};

inline QueueAssignment assign_queues(const FlowSet& fs) {
    QueueAssignment qa;
    std::set<Tick> period_set;
    for (const Flow& f : fs.flows)
        if (f.is_ts()) period_set.insert(f.period);
    std::vector<Tick> classes(period_set.begin(), period_set.end());

    const int budget = fs.link.queue_count - 1;
    if (!classes.empty() && budget < 1)
        throw SpecError("need at least two queues to host TS and BE traffic");
    int merged_into_first = 0;
    if (static_cast<int>(classes.size()) > budget)
        merged_into_first = static_cast<int>(classes.size()) - budget;

    std::map<Tick, int> queue_of_class;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const int q = c < static_cast<std::size_t>(merged_into_first + 1)
                          ? 0
                          : static_cast<int>(c) - merged_into_first;
        queue_of_class[classes[c]] = q;
    }
    int ts_used = classes.empty() ? 0 : std::min<int>(static_cast<int>(classes.size()), budget);
    for (int q = 0; q < ts_used; ++q) qa.ts_queues.push_back(q);
    for (int q = ts_used; q < fs.link.queue_count; ++q) qa.be_queues.push_back(q);

    std::vector<const Flow*> be;
    for (const Flow& f : fs.flows) {
        if (f.is_ts()) {
            qa.queue_of_flow[f.id] = queue_of_class.at(f.period);
        } else {
            be.push_back(&f);
        }
    }
    std::sort(be.begin(), be.end(), [](const Flow* a, const Flow* b) {
        return std::tuple(a->priority, a->id) < std::tuple(b->priority, b->id);
    });
    if (!be.empty() && qa.be_queues.empty())
        throw SpecError("no queue left for best-effort traffic");
    for (std::size_t i = 0; i < be.size(); ++i)
        qa.queue_of_flow[be[i]->id] = qa.be_queues[i % qa.be_queues.size()];
    return qa;
}

// Render a verified schedule as a gate control list: during each reserved
// window exactly the owning TS gate is open; everywhere else the BE gates
// are open. Rows tile [0, cycle).
inline GateControlList emit_gcl(const Schedule& sched, const std::vector<Flow>& flows,
                                const QueueAssignment& qa, int queue_count) {
    GateControlList gcl;
    gcl.queue_count = queue_count;
    std::uint32_t be_mask = 0;
    std::set<int> ts_qs(qa.ts_queues.begin(), qa.ts_queues.end());
    for (int q = 0; q < queue_count; ++q)
        if (!ts_qs.count(q)) be_mask |= 1u << q;

    if (sched.empty()) {
        gcl.cycle = 1;
        gcl.rows.push_back({0, 1, be_mask});
        return gcl;
    }
    gcl.cycle = sched.cycle;

    struct Seg {
        Tick start, end;
        std::uint32_t mask;
    };
    std::vector<Seg> segs;
    for (const PacketWindow& w : cycle_windows(sched, flows)) {
        auto it = qa.queue_of_flow.find(w.flow_id);
        if (it == qa.queue_of_flow.end())
            throw SpecError("no queue assigned to flow " + std::to_string(w.flow_id));
        if (it->second >= queue_count) throw SpecError("queue assignment exceeds queue count");
        const std::uint32_t mask = 1u << it->second;
        if (w.end <= gcl.cycle) {
            segs.push_back({w.start, w.end, mask});
        } else {
            segs.push_back({w.start, gcl.cycle, mask});
            segs.push_back({0, w.end - gcl.cycle, mask});
        }
    }
    std::sort(segs.begin(), segs.end(),
              [](const Seg& a, const Seg& b) { return a.start < b.start; });
    for (std::size_t i = 1; i < segs.size(); ++i)
        if (segs[i].start < segs[i - 1].end)
            throw SpecError("cannot emit GCL from a schedule with overlapping windows");

    Tick cursor = 0;
    for (const Seg& s : segs) {
        if (s.start > cursor) gcl.rows.push_back({cursor, s.start, be_mask});
        gcl.rows.push_back({s.start, s.end, s.mask});
        cursor = s.end;
    }
    if (cursor < gcl.cycle) gcl.rows.push_back({cursor, gcl.cycle, be_mask});

    // Merge adjacent rows with identical gates.
    std::vector<GclRow> merged;
    for (const GclRow& r : gcl.rows) {
        if (!merged.empty() && merged.back().gate_mask == r.gate_mask &&
            merged.back().end == r.start)
            merged.back().end = r.end;
        else
            merged.push_back(r);
    }
    gcl.rows = std::move(merged);
    return gcl;
}

// Independent checker: overlaps, deadline misses, jitter violations, and the
// bandwidth budget.
inline ScheduleVerdict verify_schedule(const Schedule& sched, const std::vector<Flow>& flows,
                                       const JitterConstraintSet& constraints,
                                       const EdgeSpec& edge) {
    ScheduleVerdict v = detail::verify_core(sched, flows, constraints);
    if (!admission_check(flows, edge))
        v.violations.push_back({ViolationKind::Bandwidth, -1, -1, 0,
                                "total TS bandwidth exceeds the edge rate"});
    v.schedulable = v.violations.empty();
    return v;
}

struct ScheduleResult {
    Schedule schedule;
    ScheduleVerdict verdict;
};

// Static schedule calculation. Ideal path when the whole set is combinable;
// otherwise set partitioning, per-subset ideal offsets inside the remaining
// slots, and per-packet conflict elimination over the hyperperiod.
inline ScheduleResult compute_static_schedule(const std::vector<Flow>& flows,
                                              const std::vector<Tick>& phi,
                                              const JitterConstraintSet& constraints,
                                              const std::vector<Tick>& proc,
                                              const ScheduleLimits& limits = {}) {
    const std::size_t k = flows.size();
    if (k == 0) throw SpecError("schedule computation needs at least one flow");
    if (phi.size() != k || proc.size() != k) throw SpecError("phi/processing size mismatch");
    constraints.validate(k);

    std::vector<Tick> periods;
    Tick sum_tau = 0;
    for (const Flow& f : flows) {
        if (!f.is_ts()) throw SpecError("static schedules cover TS flows only");
        periods.push_back(f.period);
        sum_tau = checked_add(sum_tau, f.service_time);
    }
    const Wide l_wide = hyperperiod(periods);
    if (l_wide > static_cast<Wide>(limits.hyperperiod_cap))
        throw OverflowError("hyperperiod " + portsched::to_string(l_wide) +
                            " exceeds cap " + std::to_string(limits.hyperperiod_cap));
    const Tick cycle = narrow_tick(l_wide, "hyperperiod");
    const Tick g = gcd_periods(periods);

    ScheduleResult res;
    if (k == 1 || (g > 1 && sum_tau < g)) {
        OffsetResult off = nonconflict_offsets(flows, phi, constraints, proc);
        res.verdict.unsolved = off.unsolved;
        if (off.unsolved != 0) {
            res.verdict.schedulable = false;
            res.verdict.violations.push_back(
                {ViolationKind::Deadline, -1, -1, 0, off.detail});
            return res;
        }
        res.schedule.mode = ScheduleMode::IdealOffsets;
        res.schedule.cycle = cycle;
        for (std::size_t i = 0; i < k; ++i)
            res.schedule.departures.push_back({flows[i].id, off.first_departure[i]});
        res.verdict = detail::verify_core(res.schedule, flows, constraints);
        return res;
    }

    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::microseconds(static_cast<std::int64_t>(limits.timeout_s * 1e6));

    std::vector<Tick> departure(k);
    for (std::size_t i = 0; i < k; ++i) departure[i] = checked_add(phi[i], proc[i]);
    const std::vector<Tick> emergence = departure;

    auto subsets = partition_flowset(flows);
    std::sort(subsets.begin(), subsets.end(), [&](const auto& a, const auto& b) {
        std::vector<Tick> pa, pb;
        for (auto i : a) pa.push_back(flows[i].period);
        for (auto i : b) pb.push_back(flows[i].period);
        return std::tuple(-gcd_periods(pa), flows[a.front()].id) <
               std::tuple(-gcd_periods(pb), flows[b.front()].id);
    });

    detail::CircularIntervals reserved(cycle);
    std::vector<std::size_t> committed;
    for (const auto& subset : subsets) {
        if (std::chrono::steady_clock::now() > deadline) {
            res.verdict.schedulable = false;
            res.verdict.violations.push_back(
                {ViolationKind::Overlap, -1, -1, 0, "schedule search timed out"});
            return res;
        }
        std::vector<Tick> sub_periods;
        Tick sub_tau = 0;
        for (std::size_t i : subset) {
            sub_periods.push_back(flows[i].period);
            sub_tau = checked_add(sub_tau, flows[i].service_time);
        }
        const Tick gs = gcd_periods(sub_periods);
        if (!(gs > 1 && sub_tau < gs)) continue;

        // A committed flow with a co-prime period makes collision certain
        // for any offset, so the slot search cannot succeed.
        bool hopeless = false;
        for (std::size_t i : subset)
            for (std::size_t j : committed)
                if (gcd_wide(flows[i].period, flows[j].period) == 1) hopeless = true;
        if (hopeless) continue;

        bool ok = true;
        std::vector<Tick> saved;
        for (std::size_t i : subset) saved.push_back(departure[i]);
        for (std::size_t i : detail::search_order(flows, subset)) {
            auto delta = detail::search_offset(flows, departure, i, subset, gs, &reserved, cycle,
                                               flows[i].period);
            if (!delta || *delta > constraints.delay_bound[i]) {
                ok = false;
                break;
            }
            departure[i] += *delta;
        }
        if (!ok) {
            std::size_t p = 0;
            for (std::size_t i : subset) departure[i] = saved[p++];
            continue;
        }
        for (std::size_t i : subset)
            for (Tick off = 0; off < cycle; off += flows[i].period)
                reserved.insert(mod_pos(departure[i] + off, cycle), flows[i].service_time);
        committed.insert(committed.end(), subset.begin(), subset.end());
    }

    // Steady-state packet table over one hyperperiod, then conflict
    // elimination driven by the predicted solution spaces.
    std::vector<detail::TableRow> rows;
    std::vector<std::size_t> row_base(k);
    for (std::size_t i = 0; i < k; ++i) {
        row_base[i] = rows.size();
        const std::int64_t lam = cycle / flows[i].period;
        for (std::int64_t n = 0; n < lam; ++n) {
            const Tick s = checked_add(departure[i], checked_mul(n, flows[i].period));
            rows.push_back({static_cast<int>(i), n, s, s, flows[i].service_time});
        }
    }
    std::vector<std::pair<std::size_t, std::size_t>> worklist;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j)
            for (const auto& [n, m] : detail::predicted_pair_conflicts(
                     flows[i], flows[j], departure[i], departure[j], cycle))
                worklist.push_back({row_base[i] + static_cast<std::size_t>(n),
                                    row_base[j] + static_cast<std::size_t>(m)});

    EliminationOutcome elim = detail::eliminate_rows(std::move(rows), flows, constraints, cycle,
                                                     std::move(worklist), deadline);
    if (!elim.ok) {
        res.verdict.schedulable = false;
        res.verdict.unsolved = 1;
        res.verdict.violations = elim.failures;
        return res;
    }
    res.schedule.mode = ScheduleMode::PerPacketTable;
    res.schedule.cycle = cycle;
    res.schedule.table = std::move(elim.table);
    res.verdict = detail::verify_core(res.schedule, flows, constraints);
    return res;
}

inline ScheduleResult compute_static_schedule(const std::vector<Flow>& flows,
                                              const ScheduleLimits& limits = {}) {
    std::vector<Tick> phi, proc;
    for (const Flow& f : flows) {
        phi.push_back(f.initial_offset);
        proc.push_back(f.processing);
    }
    return compute_static_schedule(flows, phi, JitterConstraintSet::from_flows(flows), proc, limits);
}

} // namespace portsched
