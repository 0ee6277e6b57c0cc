// Number-theoretic engine for flow combinability: conflict classification of
// periodic flows, chained linear-Diophantine solution spaces enumerating the
// colliding packet indices, and a brute-force oracle used for verification.
//
// Conventions used throughout:
//   - window n of flow i occupies [n*T_i + o_i, n*T_i + o_i + tau_i)
//   - two windows conflict "first kind" (CFK) when their starts are equal and
//     "second kind" (CSK) when they overlap with unequal starts
//   - the chain system for flows 1..K is
//         T_i x_i - T_{i+1} x_{i+1} = (o_{i+1} - o_i) + v_i
//     with v = 0 for CFK; for CSK the start difference of adjacent windows is
//     v_i = s_i - s_{i+1}, so partial overlap means v_i in
//     [-(tau_i - 1), tau_{i+1} - 1] \ {0}.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "portsched/flow.hpp"
#include "portsched/ticks.hpp"

namespace portsched {

inline Tick gcd_periods(const std::vector<Tick>& periods) {
    if (periods.empty()) throw SpecError("gcd of an empty period list");
    Tick g = 0;
    for (Tick t : periods) {
        if (t <= 0) throw SpecError("periods must be positive");
        g = static_cast<Tick>(gcd_wide(g, t));
    }
    return g;
}

// LCM of all periods with 128-bit checked arithmetic.
inline Wide hyperperiod(const std::vector<Tick>& periods) {
    if (periods.empty()) throw SpecError("lcm of an empty period list");
    Wide l = 1;
    for (Tick t : periods) {
        if (t <= 0) throw SpecError("periods must be positive");
        l = checked_mul_wide(l / gcd_wide(l, t), t);
    }
    return l;
}

inline Tick hyperperiod_ticks(const std::vector<Tick>& periods) {
    return narrow_tick(hyperperiod(periods), "hyperperiod");
}

// Integer solutions of a*x - b*y = c for a, b > 0. When solvable, the
// particular solution is the one with minimal non-negative x; the full set is
// (x0 + k*step_x, y0 + k*step_y) over integer k.
struct DiophantineSolution {
    bool exists = false;
    Wide x0 = 0, y0 = 0;
    Wide step_x = 0, step_y = 0;  // b/g, a/g
};

inline DiophantineSolution extended_bezout(Wide a, Wide b, Wide c) {
    if (a <= 0 || b <= 0) throw SpecError("extended_bezout needs positive coefficients");
    // Extended Euclid: u*a + v*b = g.
    Wide old_r = a, r = b;
    Wide old_u = 1, u = 0;
    while (r != 0) {
        Wide q = old_r / r;
        Wide tmp = old_r - q * r;
        old_r = r;
        r = tmp;
        tmp = old_u - q * u;
        old_u = u;
        u = tmp;
    }
    Wide g = old_r;
    if (c % g != 0) return {};

    DiophantineSolution sol;
    sol.exists = true;
    sol.step_x = b / g;
    sol.step_y = a / g;
    // a*(u*c/g) ≡ c (mod b); reduce factors first to keep products small.
    Wide x = checked_mul_wide(mod_pos_wide(old_u, sol.step_x), mod_pos_wide(c / g, sol.step_x));
    sol.x0 = mod_pos_wide(x, sol.step_x);
    sol.y0 = (checked_mul_wide(a, sol.x0) - c) / b;
    return sol;
}

// Full solution set of the chained system, expressed as base + k*step per
// coordinate with a shared k in N. Solved recursively: each new equation is
// matched against the accumulated lattice through one more Bezout solve on
// the coefficient variables.
struct ChainSolution {
    bool exists = false;
    std::vector<Wide> base;
    std::vector<Wide> step;
};

inline ChainSolution solve_chain(const std::vector<Tick>& periods, const std::vector<Wide>& rhs) {
    const std::size_t k = periods.size();
    if (k < 2) throw SpecError("chain system needs at least two flows");
    if (rhs.size() != k - 1) throw SpecError("chain system needs K-1 right-hand sides");

    DiophantineSolution first = extended_bezout(periods[0], periods[1], rhs[0]);
    if (!first.exists) return {};

    ChainSolution sol;
    sol.exists = true;
    sol.base = {first.x0, first.y0};
    sol.step = {first.step_x, first.step_y};

    for (std::size_t n = 1; n + 1 < k; ++n) {
        DiophantineSolution pair = extended_bezout(periods[n], periods[n + 1], rhs[n]);
        if (!pair.exists) return {};
        // x_n = base[n] + t*step[n]  must equal  pair.x0 + t2*pair.step_x.
        DiophantineSolution match = extended_bezout(sol.step[n], pair.step_x, pair.x0 - sol.base[n]);
        if (!match.exists) return {};
        for (std::size_t i = 0; i <= n; ++i) {
            sol.base[i] = checked_add_wide(sol.base[i], checked_mul_wide(match.x0, sol.step[i]));
            sol.step[i] = checked_mul_wide(sol.step[i], match.step_x);
        }
        sol.base.push_back(checked_add_wide(pair.y0, checked_mul_wide(match.y0, pair.step_y)));
        sol.step.push_back(checked_mul_wide(match.step_y, pair.step_y));
    }

    // Lift so every packet index is non-negative for k = 0.
    Wide lift = 0;
    for (std::size_t i = 0; i < k; ++i)
        if (sol.base[i] < 0) lift = std::max(lift, div_ceil_wide(-sol.base[i], sol.step[i]));
    if (lift > 0)
        for (std::size_t i = 0; i < k; ++i)
            sol.base[i] = checked_add_wide(sol.base[i], checked_mul_wide(lift, sol.step[i]));
    return sol;
}

// Packet-index tuples of simultaneous collisions: indices base + k*step for
// k in N. overlaps holds the CSK start-difference vector (all zero for CFK).
struct ConflictSolutionSpace {
    bool exists = false;
    std::vector<Wide> base;
    std::vector<Wide> step;
    std::vector<Tick> overlaps;
};

namespace detail {

inline std::vector<Tick> ts_periods(const std::vector<Flow>& flows) {
    std::vector<Tick> t;
    t.reserve(flows.size());
    for (const Flow& f : flows) {
        if (!f.is_ts()) throw SpecError("combinability analysis applies to TS flows");
        t.push_back(f.period);
    }
    return t;
}

} // namespace detail

inline ConflictSolutionSpace cfk_solution_space(const std::vector<Flow>& flows,
                                                const std::vector<Tick>& offsets) {
    if (flows.size() < 2 || offsets.size() != flows.size())
        throw SpecError("cfk_solution_space needs K >= 2 flows with offsets");
    std::vector<Tick> periods = detail::ts_periods(flows);
    std::vector<Wide> rhs;
    for (std::size_t i = 0; i + 1 < flows.size(); ++i)
        rhs.push_back(static_cast<Wide>(offsets[i + 1]) - offsets[i]);
    ChainSolution chain = solve_chain(periods, rhs);
    ConflictSolutionSpace space;
    space.exists = chain.exists;
    space.base = std::move(chain.base);
    space.step = std::move(chain.step);
    space.overlaps.assign(flows.size() - 1, 0);
    return space;
}

// Start time of flow 0's window in the k-th solution tuple.
inline Wide space_collision_time(const ConflictSolutionSpace& space,
                                 const std::vector<Flow>& flows,
                                 const std::vector<Tick>& offsets, Wide k) {
    if (!space.exists) throw SpecError("no solution space");
    Wide idx = checked_add_wide(space.base[0], checked_mul_wide(k, space.step[0]));
    return checked_add_wide(checked_mul_wide(idx, flows[0].period), offsets[0]);
}

inline ConflictSolutionSpace csk_solution_space_for(const std::vector<Flow>& flows,
                                                    const std::vector<Tick>& offsets,
                                                    const std::vector<Tick>& v) {
    if (flows.size() < 2 || offsets.size() != flows.size() || v.size() != flows.size() - 1)
        throw SpecError("csk_solution_space_for needs K >= 2 flows, offsets, and K-1 overlaps");
    std::vector<Tick> periods = detail::ts_periods(flows);
    std::vector<Wide> rhs;
    for (std::size_t i = 0; i + 1 < flows.size(); ++i) {
        Tick lo = -(flows[i].service_time - 1);
        Tick hi = flows[i + 1].service_time - 1;
        if (v[i] == 0) throw SpecError("CSK overlap component must be non-zero");
        if (v[i] < lo || v[i] > hi)
            throw SpecError("CSK overlap component outside the partial-overlap range");
        rhs.push_back(static_cast<Wide>(offsets[i + 1]) - offsets[i] + v[i]);
    }
    ChainSolution chain = solve_chain(periods, rhs);
    ConflictSolutionSpace space;
    space.exists = chain.exists;
    space.base = std::move(chain.base);
    space.step = std::move(chain.step);
    space.overlaps = v;
    return space;
}

// One solution space per overlap vector with every component in the
// partial-overlap range and non-zero; unsolvable vectors are omitted.
inline std::vector<ConflictSolutionSpace> csk_solution_spaces(
    const std::vector<Flow>& flows, const std::vector<Tick>& offsets,
    std::size_t max_spaces = (1u << 20)) {
    if (flows.size() < 2 || offsets.size() != flows.size())
        throw SpecError("csk_solution_spaces needs K >= 2 flows with offsets");
    const std::size_t k = flows.size();

    std::vector<std::vector<Tick>> ranges(k - 1);
    std::size_t total = 1;
    for (std::size_t i = 0; i + 1 < k; ++i) {
        for (Tick v = -(flows[i].service_time - 1); v <= flows[i + 1].service_time - 1; ++v)
            if (v != 0) ranges[i].push_back(v);
        if (ranges[i].empty()) return {};  // unit service times: CSK impossible
        if (total > max_spaces / ranges[i].size())
            throw SpecError("CSK overlap enumeration exceeds the configured cap");
        total *= ranges[i].size();
    }

    std::vector<ConflictSolutionSpace> out;
    std::vector<std::size_t> odo(k - 1, 0);
    for (;;) {
        std::vector<Tick> v(k - 1);
        for (std::size_t i = 0; i + 1 < k; ++i) v[i] = ranges[i][odo[i]];
        ConflictSolutionSpace space = csk_solution_space_for(flows, offsets, v);
        if (space.exists) out.push_back(std::move(space));
        std::size_t pos = 0;
        while (pos < k - 1 && ++odo[pos] == ranges[pos].size()) odo[pos++] = 0;
        if (pos == k - 1) break;
    }
    return out;
}

enum class ConflictKind { None, Cfk, Csk };

inline std::string to_string(ConflictKind k) {
    switch (k) {
        case ConflictKind::Cfk: return "CFK";
        case ConflictKind::Csk: return "CSK";
        default: return "none";
    }
}

struct ConflictWitness {
    std::int64_t n = 0, m = 0;  // packet indices of the two flows
    Tick time = 0;              // start of the first flow's window
};

struct ConflictClass {
    ConflictKind kind = ConflictKind::None;
    std::optional<ConflictWitness> witness;
};

namespace detail {

// Lift a Bezout particular solution to the minimal pair with both packet
// indices non-negative; both coordinates grow with k, so this is also the
// earliest such collision.
inline std::optional<ConflictWitness> lift_witness(const DiophantineSolution& s, Tick t1, Tick o1) {
    if (!s.exists) return std::nullopt;
    Wide k = 0;
    if (s.y0 < 0) k = div_ceil_wide(-s.y0, s.step_y);
    Wide n = s.x0 + k * s.step_x;
    Wide m = s.y0 + k * s.step_y;
    ConflictWitness w;
    w.n = static_cast<std::int64_t>(n);
    w.m = static_cast<std::int64_t>(m);
    w.time = narrow_tick(checked_add_wide(checked_mul_wide(n, t1), o1), "collision time");
    return w;
}

} // namespace detail

// Conflict class of two TS flows with assigned offsets. CFK takes precedence
// when both kinds exist; the witness is the earliest collision of the
// returned kind.
inline ConflictClass pairwise_conflict_class(const Flow& f1, const Flow& f2, Tick o1, Tick o2) {
    if (!f1.is_ts() || !f2.is_ts()) throw SpecError("conflict class applies to TS flows");
    const Tick g = static_cast<Tick>(gcd_wide(f1.period, f2.period));
    const Tick d = mod_pos(o1 - o2, g);

    ConflictClass out;
    if (d == 0) {
        out.kind = ConflictKind::Cfk;
        out.witness = detail::lift_witness(
            extended_bezout(f1.period, f2.period, static_cast<Wide>(o2) - o1), f1.period, o1);
        return out;
    }

    // Start differences achievable between the two grids are d + multiples of
    // g; overlap needs s1 - s2 strictly inside (-tau1, tau2).
    std::vector<Tick> candidates;
    if (d <= f2.service_time - 1) candidates.push_back(d);
    if (d - g >= -(f1.service_time - 1)) candidates.push_back(d - g);
    std::optional<ConflictWitness> best;
    for (Tick v : candidates) {
        auto w = detail::lift_witness(
            extended_bezout(f1.period, f2.period, static_cast<Wide>(o2) - o1 + v), f1.period, o1);
        if (w && (!best || w->time < best->time)) best = w;
    }
    if (best) {
        out.kind = ConflictKind::Csk;
        out.witness = best;
    }
    return out;
}

struct ExistencePrediction {
    bool cfk_certain = false;
    bool csk_certain = false;
};

// Theorem-style certainty test from periods alone (offset-independent).
inline ExistencePrediction predict_existence(const std::vector<Flow>& flows) {
    if (flows.size() < 2) throw SpecError("existence prediction needs at least two flows");
    std::vector<Tick> periods = detail::ts_periods(flows);
    ExistencePrediction p;
    p.cfk_certain = gcd_periods(periods) == 1;
    if (p.cfk_certain)
        for (const Flow& f : flows)
            if (f.service_time > 1) p.csk_certain = true;
    return p;
}

// Sufficient non-collision conditions for K flows: common gcd above 1, the
// pairwise circular spacing, and total service time strictly below the gcd.
inline bool verify_noncollision_k(const std::vector<Flow>& flows, const std::vector<Tick>& offsets) {
    if (offsets.size() != flows.size()) throw SpecError("offset count must match flow count");
    if (flows.size() < 2) return true;
    std::vector<Tick> periods = detail::ts_periods(flows);
    const Tick g = gcd_periods(periods);
    if (g <= 1) return false;
    Tick total = 0;
    for (const Flow& f : flows) total = checked_add(total, f.service_time);
    if (total >= g) return false;
    for (std::size_t i = 0; i < flows.size(); ++i)
        for (std::size_t j = i + 1; j < flows.size(); ++j) {
            const Tick d = mod_pos(offsets[i] - offsets[j], g);
            if (d < flows[j].service_time || d > g - flows[i].service_time) return false;
        }
    return true;
}

struct ConflictEntry {
    Tick start = 0, end = 0;  // overlap window; may extend past the hyperperiod when wrapping
    ConflictKind kind = ConflictKind::None;
    std::array<int, 2> flow_ids{};
    std::array<std::int64_t, 2> packet_indices{};

    bool operator==(const ConflictEntry&) const = default;
};

using ConflictList = std::vector<ConflictEntry>;

namespace detail {

struct BruteWindow {
    Tick start = 0;
    Tick len = 0;
    int flow = 0;
    std::int64_t packet = 0;
    bool copy = false;  // shifted duplicate used for circular comparison
};

inline void emit_pair(ConflictList& out, const BruteWindow& a, const BruteWindow& b, Wide l) {
    // a.start <= b.start by construction.
    if (a.flow == b.flow) return;
    if (a.start + a.len <= b.start) return;
    if (a.copy && b.copy) return;  // base pair already reported
    ConflictEntry e;
    e.kind = a.start == b.start ? ConflictKind::Cfk : ConflictKind::Csk;
    Tick start = b.start;
    Tick end = std::min(a.start + a.len, b.start + b.len);
    if (l > 0 && static_cast<Wide>(start) >= l) {
        start = narrow_tick(static_cast<Wide>(start) - l, "conflict time");
        end = narrow_tick(static_cast<Wide>(end) - l, "conflict time");
    }
    e.start = start;
    e.end = end;
    // Canonical order: lower flow id first.
    const BruteWindow* lo = &a;
    const BruteWindow* hi = &b;
    if (lo->flow > hi->flow) std::swap(lo, hi);
    e.flow_ids = {lo->flow, hi->flow};
    e.packet_indices = {lo->packet, hi->packet};
    out.push_back(e);
}

} // namespace detail

// Exhaustive Definition-1 check by direct window enumeration. With a horizon
// of at least one hyperperiod the steady-state pattern is compared circularly
// (windows wrapping the cycle boundary meet the next cycle's start), which
// makes the result exact for all packet indices. Shorter horizons scan
// [0, horizon) linearly.
inline ConflictList brute_force_conflicts(const std::vector<Flow>& flows,
                                          const std::vector<Tick>& offsets, Tick horizon) {
    if (offsets.size() != flows.size()) throw SpecError("offset count must match flow count");
    if (horizon <= 0) throw SpecError("horizon must be positive");
    if (flows.size() < 2) return {};
    std::vector<Tick> periods = detail::ts_periods(flows);
    const Wide l = hyperperiod(periods);
    const bool circular = static_cast<Wide>(horizon) >= l;

    Wide window_count = 0;
    const Wide span = circular ? l : static_cast<Wide>(horizon);
    for (Tick t : periods) window_count += div_ceil_wide(span, t);
    if (window_count > 50'000'000) throw OverflowError("horizon too large to enumerate");

    Tick max_len = 1;
    for (const Flow& f : flows) max_len = std::max(max_len, f.service_time);

    std::vector<detail::BruteWindow> windows;
    windows.reserve(static_cast<std::size_t>(window_count) * (circular ? 2 : 1));
    for (std::size_t i = 0; i < flows.size(); ++i) {
        const Tick t = flows[i].period;
        const Tick tau = flows[i].service_time;
        if (circular) {
            const Tick lt = narrow_tick(l, "hyperperiod");
            const Tick r = mod_pos(offsets[i], t);
            for (Tick s = r; s < lt; s += t) {
                const std::int64_t n = mod_pos(s - offsets[i], lt) / t;
                windows.push_back({s, tau, flows[i].id, n, false});
                if (s < max_len)  // circular comparison against the cycle end
                    windows.push_back({s + lt, tau, flows[i].id, n, true});
            }
        } else {
            for (Tick s = offsets[i], n = 0; s < horizon; s += t, ++n)
                windows.push_back({s, tau, flows[i].id, n, false});
        }
    }

    std::sort(windows.begin(), windows.end(), [](const auto& a, const auto& b) {
        if (a.start != b.start) return a.start < b.start;
        if (a.flow != b.flow) return a.flow < b.flow;
        return a.packet < b.packet;
    });

    ConflictList out;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        for (std::size_t j = i; j-- > 0;) {
            if (windows[j].start + max_len <= windows[i].start) break;
            detail::emit_pair(out, windows[j], windows[i], circular ? l : 0);
        }
    }
    std::sort(out.begin(), out.end(), [](const ConflictEntry& a, const ConflictEntry& b) {
        return std::tie(a.start, a.flow_ids, a.packet_indices) <
               std::tie(b.start, b.flow_ids, b.packet_indices);
    });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Analytic conflict prediction: every pairwise CFK/CSK occurrence with a
// window start below the horizon, enumerated from the Bezout progressions
// instead of scanning.
inline ConflictList predicted_conflicts(const std::vector<Flow>& flows,
                                        const std::vector<Tick>& offsets, Tick horizon) {
    if (offsets.size() != flows.size()) throw SpecError("offset count must match flow count");
    if (horizon <= 0) throw SpecError("horizon must be positive");
    ConflictList out;
    for (std::size_t i = 0; i < flows.size(); ++i) {
        for (std::size_t j = i + 1; j < flows.size(); ++j) {
            const Flow& fa = flows[i];
            const Flow& fb = flows[j];
            if (!fa.is_ts() || !fb.is_ts()) throw SpecError("prediction applies to TS flows");
            const Tick g = static_cast<Tick>(gcd_wide(fa.period, fb.period));
            const Tick step_n = fb.period / g;

            auto add_space = [&](Tick v) {
                DiophantineSolution s = extended_bezout(
                    fa.period, fb.period, static_cast<Wide>(offsets[j]) - offsets[i] + v);
                auto w = detail::lift_witness(s, fa.period, offsets[i]);
                if (!w) return;
                for (std::int64_t n = w->n, m = w->m;; n += step_n, m += fa.period / g) {
                    const Tick sa = static_cast<Tick>(n) * fa.period + offsets[i];
                    if (sa >= horizon) break;
                    const Tick sb = sa - v;
                    ConflictEntry e;
                    e.kind = v == 0 ? ConflictKind::Cfk : ConflictKind::Csk;
                    e.start = std::max(sa, sb);
                    e.end = std::min(sa + fa.service_time, sb + fb.service_time);
                    e.flow_ids = {fa.id, fb.id};
                    e.packet_indices = {n, m};
                    out.push_back(e);
                }
            };
            add_space(0);
            for (Tick v = -(fa.service_time - 1); v <= fb.service_time - 1; ++v)
                if (v != 0) add_space(v);
        }
    }
    std::sort(out.begin(), out.end(), [](const ConflictEntry& a, const ConflictEntry& b) {
        return std::tie(a.start, a.flow_ids, a.packet_indices) <
               std::tie(b.start, b.flow_ids, b.packet_indices);
    });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

inline nlohmann::json conflict_list_to_json(const ConflictList& list) {
    nlohmann::json j = nlohmann::json::array();
    for (const ConflictEntry& e : list)
        j.push_back({{"time_start", e.start},
                     {"time_end", e.end},
                     {"kind", to_string(e.kind)},
                     {"flow_ids", e.flow_ids},
                     {"packet_indices", e.packet_indices}});
    return j;
}

inline std::string conflict_list_to_csv(const ConflictList& list) {
    std::ostringstream os;
    os << "time_start,time_end,kind,flow_ids,packet_indices\n";
    for (const ConflictEntry& e : list)
        os << e.start << ',' << e.end << ',' << to_string(e.kind) << ',' << e.flow_ids[0] << '|'
           << e.flow_ids[1] << ',' << e.packet_indices[0] << '|' << e.packet_indices[1] << '\n';
    return os.str();
}

} // namespace portsched
