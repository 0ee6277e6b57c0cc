#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>

#include "test_support.hpp"

using namespace portsched;
using portsched::testing::coprime_triple;
using portsched::testing::oracle_pair_kinds;
using portsched::testing::random_instance;
using portsched::testing::ts_flow;

TEST_CASE("gcd and hyperperiod of period lists") {
    CHECK(gcd_periods({14, 27}) == 1);
    CHECK(gcd_periods({500'000, 2'000'000, 5'000'000}) == 500'000);
    CHECK(gcd_periods({42}) == 42);
    CHECK_THROWS_AS(gcd_periods({}), SpecError);

    CHECK(hyperperiod({14, 27, 61}) == 23058);
    CHECK(hyperperiod_ticks({500'000, 2'000'000, 5'000'000}) == 10'000'000);
    CHECK(hyperperiod({7, 7}) == 7);

    // Products of many distinct primes exceed 127 bits.
    std::vector<Tick> primes = {2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,
                                41,  43,  47,  53,  59,  61,  67,  71,  73,  79,  83,  89,
                                97,  101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151,
                                157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223,
                                227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281,
                                283, 293, 307, 311, 313, 317, 331, 337, 347, 349};
    CHECK_THROWS_AS(hyperperiod(primes), OverflowError);
}

TEST_CASE("extended Bezout particular solutions") {
    SECTION("worked pair equations") {
        DiophantineSolution s = extended_bezout(14, 27, 5);
        REQUIRE(s.exists);
        CHECK(s.x0 == 10);
        CHECK(s.y0 == 5);
        CHECK(s.step_x == 27);
        CHECK(s.step_y == 14);

        s = extended_bezout(27, 61, 4);
        REQUIRE(s.exists);
        CHECK(s.x0 == 25);
        CHECK(s.y0 == 11);
        CHECK(s.step_x == 61);
        CHECK(s.step_y == 27);
    }
    SECTION("divisibility gate") {
        CHECK_FALSE(extended_bezout(4, 6, 3).exists);
        CHECK(extended_bezout(4, 6, 2).exists);
    }
    SECTION("random equations verify by substitution") {
        Rng rng(7);
        for (int it = 0; it < 500; ++it) {
            const Wide a = 1 + static_cast<Wide>(rng.uniform(500));
            const Wide b = 1 + static_cast<Wide>(rng.uniform(500));
            const Wide c = static_cast<Wide>(rng.uniform_i64(-1000, 1000));
            DiophantineSolution s = extended_bezout(a, b, c);
            const Wide g = gcd_wide(a, b);
            REQUIRE(s.exists == (c % g == 0));
            if (!s.exists) continue;
            CHECK(a * s.x0 - b * s.y0 == c);
            CHECK(s.x0 >= 0);
            CHECK(s.x0 < s.step_x);
            CHECK(a * s.step_x == b * s.step_y);
            CHECK(gcd_wide(s.step_x, s.step_y) == gcd_wide(b / g, a / g));
            CHECK(gcd_wide(b / g, a / g) == gcd_wide(a / g, b / g));
        }
    }
}

TEST_CASE("chained solution space reproduces the worked co-prime example") {
    const std::vector<Flow> flows = coprime_triple();
    const std::vector<Tick> offsets = {0, 5, 9};
    const ConflictSolutionSpace space = cfk_solution_space(flows, offsets);
    REQUIRE(space.exists);
    REQUIRE(space.base.size() == 3);
    CHECK(space.base[0] == 1225);
    CHECK(space.base[1] == 635);
    CHECK(space.base[2] == 281);
    CHECK(space.step[0] == 1647);
    CHECK(space.step[1] == 854);
    CHECK(space.step[2] == 378);
    CHECK(space_collision_time(space, flows, offsets, 0) == 17150);

    SECTION("soundness: the first few tuples satisfy every chain equation") {
        for (Wide k = 0; k <= 2; ++k) {
            const Wide t0 = space_collision_time(space, flows, offsets, k);
            for (std::size_t i = 0; i < flows.size(); ++i) {
                const Wide idx = space.base[i] + k * space.step[i];
                CHECK(idx * flows[i].period + offsets[i] == t0);
                CHECK(idx >= 0);
            }
        }
    }
}

TEST_CASE("trivial two-flow space: both first packets collide at zero") {
    const std::vector<Flow> flows = {ts_flow(0, 2, 1, 0), ts_flow(1, 3, 1, 0)};
    const ConflictSolutionSpace space = cfk_solution_space(flows, {0, 0});
    REQUIRE(space.exists);
    CHECK(space.base == std::vector<Wide>{0, 0});
    CHECK(space.step == std::vector<Wide>{3, 2});
}

TEST_CASE("CSK solution spaces") {
    const std::vector<Flow> pair = {ts_flow(0, 14, 3, 0), ts_flow(1, 27, 3, 5)};
    SECTION("single overlap vector") {
        const ConflictSolutionSpace s = csk_solution_space_for(pair, {0, 5}, {1});
        REQUIRE(s.exists);
        CHECK(s.base == std::vector<Wide>{12, 6});
        CHECK(s.step == std::vector<Wide>{27, 14});
        CHECK(14 * 12 - 27 * 6 == 6);
    }
    SECTION("zero overlap component is rejected") {
        CHECK_THROWS_AS(csk_solution_space_for(pair, {0, 5}, {0}), SpecError);
    }
    SECTION("unit service times admit no CSK") {
        const std::vector<Flow> unit = {ts_flow(0, 14, 1, 0), ts_flow(1, 27, 1, 5)};
        CHECK(csk_solution_spaces(unit, {0, 5}).empty());
    }
    SECTION("every enumerated space satisfies its equations") {
        const std::vector<Flow> triple = coprime_triple();
        const std::vector<Tick> offsets = {0, 5, 9};
        const auto spaces = csk_solution_spaces(triple, offsets);
        REQUIRE_FALSE(spaces.empty());
        for (const ConflictSolutionSpace& s : spaces) {
            for (std::size_t i = 0; i + 1 < triple.size(); ++i) {
                const Wide lhs = triple[i].period * s.base[i] -
                                 triple[i + 1].period * s.base[i + 1];
                CHECK(lhs == static_cast<Wide>(offsets[i + 1]) - offsets[i] + s.overlaps[i]);
            }
        }
    }
}

TEST_CASE("pairwise conflict classification") {
    SECTION("spaced flows with shared gcd do not collide") {
        const ConflictClass c =
            pairwise_conflict_class(ts_flow(0, 6, 1, 0), ts_flow(1, 9, 1, 0), 0, 1);
        CHECK(c.kind == ConflictKind::None);
        CHECK_FALSE(c.witness.has_value());
    }
    SECTION("co-prime periods give CFK with the Bezout witness") {
        const ConflictClass c =
            pairwise_conflict_class(ts_flow(0, 14, 3, 0), ts_flow(1, 27, 3, 5), 0, 5);
        REQUIRE(c.kind == ConflictKind::Cfk);
        REQUIRE(c.witness.has_value());
        CHECK(c.witness->n == 10);
        CHECK(c.witness->m == 5);
        CHECK(c.witness->time == 140);
    }
    SECTION("oversized service times force CSK") {
        const ConflictClass c =
            pairwise_conflict_class(ts_flow(0, 4, 3, 0), ts_flow(1, 4, 2, 3), 0, 3);
        REQUIRE(c.kind == ConflictKind::Csk);
        REQUIRE(c.witness.has_value());
        const Tick s1 = c.witness->n * 4 + 0;
        const Tick s2 = c.witness->m * 4 + 3;
        CHECK(s1 != s2);
        CHECK(s1 < s2 + 2);
        CHECK(s2 < s1 + 3);
    }
}

TEST_CASE("existence prediction from periods") {
    CHECK(predict_existence(coprime_triple()).cfk_certain);
    CHECK(predict_existence(coprime_triple()).csk_certain);
    const std::vector<Flow> shared = {ts_flow(0, 6, 1, 0), ts_flow(1, 9, 1, 0)};
    CHECK_FALSE(predict_existence(shared).cfk_certain);
    const std::vector<Flow> unit = {ts_flow(0, 14, 1, 0), ts_flow(1, 27, 1, 0)};
    CHECK(predict_existence(unit).cfk_certain);
    CHECK_FALSE(predict_existence(unit).csk_certain);
}

TEST_CASE("K-flow non-collision verification") {
    const std::vector<Flow> pair = {ts_flow(0, 6, 1, 0), ts_flow(1, 9, 1, 0)};
    CHECK(verify_noncollision_k(pair, {0, 1}));
    CHECK_FALSE(verify_noncollision_k(pair, {0, 0}));  // equal residues -> CFK

    // Total service time at or above the gcd fails condition 3.
    const std::vector<Flow> fat = {ts_flow(0, 6, 2, 0), ts_flow(1, 9, 1, 0)};
    CHECK_FALSE(verify_noncollision_k(fat, {0, 2}));
}

TEST_CASE("brute-force oracle basics") {
    SECTION("single flow never conflicts") {
        CHECK(brute_force_conflicts({ts_flow(0, 10, 2, 0)}, {0}, 100).empty());
    }
    SECTION("spaced pair is clean over its hyperperiod") {
        const std::vector<Flow> pair = {ts_flow(0, 6, 1, 0), ts_flow(1, 9, 1, 0)};
        CHECK(brute_force_conflicts(pair, {0, 1}, 18).empty());
    }
    SECTION("worked triple has the predicted simultaneous collision") {
        const std::vector<Flow> flows = coprime_triple();
        const ConflictList list = brute_force_conflicts(flows, {0, 5, 9}, 23058);
        REQUIRE_FALSE(list.empty());
        int cfk_at_17150 = 0;
        for (const ConflictEntry& e : list)
            if (e.start == 17150 && e.kind == ConflictKind::Cfk) ++cfk_at_17150;
        CHECK(cfk_at_17150 == 3);  // all three pairs collide simultaneously
    }
}

TEST_CASE("analytic prediction matches the oracle on the worked example") {
    const std::vector<Flow> flows = coprime_triple();
    const std::vector<Tick> offsets = {0, 5, 9};
    ConflictList predicted = predicted_conflicts(flows, offsets, 23058);
    ConflictList brute = brute_force_conflicts(flows, offsets, 23058);
    CHECK(predicted == brute);
}

TEST_CASE("property: two-flow CFK progressions are complete") {
    Rng rng(11);
    for (int it = 0; it < 200; ++it) {
        const Tick t1 = 2 + static_cast<Tick>(rng.uniform(40));
        const Tick t2 = 2 + static_cast<Tick>(rng.uniform(40));
        const Tick o1 = static_cast<Tick>(rng.uniform(static_cast<std::uint64_t>(t1)));
        const Tick o2 = static_cast<Tick>(rng.uniform(static_cast<std::uint64_t>(t2)));
        const std::vector<Flow> pair = {ts_flow(0, t1, 1, o1), ts_flow(1, t2, 1, o2)};

        std::map<std::pair<std::int64_t, std::int64_t>, bool> brute_pairs;
        for (Tick n = 0; n * t1 + o1 < t1 * t2; ++n)
            for (Tick m = 0; m * t2 + o2 < t1 * t2; ++m)
                if (n * t1 + o1 == m * t2 + o2) brute_pairs[{n, m}] = true;

        const DiophantineSolution s =
            extended_bezout(t1, t2, static_cast<Wide>(o2) - o1);
        if (!s.exists) {
            CHECK(brute_pairs.empty());
            continue;
        }
        // Every brute pair lies on the progression (x0, y0) + k (step_x, step_y).
        for (const auto& [nm, unused] : brute_pairs) {
            (void)unused;
            const Wide k = (static_cast<Wide>(nm.first) - s.x0) % s.step_x;
            CHECK(k == 0);
            const Wide kk = (static_cast<Wide>(nm.first) - s.x0) / s.step_x;
            CHECK(s.y0 + kk * s.step_y == static_cast<Wide>(nm.second));
        }
        // Theorem-1 witness: co-prime periods always collide within T1*T2.
        if (gcd_wide(t1, t2) == 1) CHECK_FALSE(brute_pairs.empty());
    }
}

TEST_CASE("property: analytic classification agrees with the oracle") {
    Rng rng(23);
    for (int it = 0; it < 150; ++it) {
        const auto inst = random_instance(rng);
        std::vector<Tick> periods;
        for (const Flow& f : inst.flows) periods.push_back(f.period);
        const Tick l = hyperperiod_ticks(periods);
        const ConflictList oracle = brute_force_conflicts(inst.flows, inst.offsets, l);
        const auto kinds = oracle_pair_kinds(oracle);

        bool any_conflict = false;
        for (std::size_t i = 0; i < inst.flows.size(); ++i) {
            for (std::size_t j = i + 1; j < inst.flows.size(); ++j) {
                const ConflictClass c = pairwise_conflict_class(
                    inst.flows[i], inst.flows[j], inst.offsets[i], inst.offsets[j]);
                auto it = kinds.find({inst.flows[i].id, inst.flows[j].id});
                const bool has_cfk = it != kinds.end() && it->second.first;
                const bool has_csk = it != kinds.end() && it->second.second;
                if (c.kind != ConflictKind::None) any_conflict = true;
                REQUIRE(c.kind == (has_cfk ? ConflictKind::Cfk
                                           : has_csk ? ConflictKind::Csk : ConflictKind::None));
            }
        }
        if (verify_noncollision_k(inst.flows, inst.offsets)) {
            REQUIRE(oracle.empty());
            REQUIRE_FALSE(any_conflict);
        }
        REQUIRE(oracle.empty() == !any_conflict);
    }
}
