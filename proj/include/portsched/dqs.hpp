// Dynamic queue scheduling for best-effort traffic: queue-length penalty
// factors, present/next utility mixing, and utility-maximizing strategy
// selection inside residual (non-reserved) time slots.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "portsched/ticks.hpp"

namespace portsched {

struct QueueState {
    int index = 0;
    int backlog = 0;             // packets ready for transfer
    Tick head_service_time = 0;  // 0 when empty
    bool gate_open = false;
};

struct PortSnapshot {
    std::vector<QueueState> queues;
};

// Pure strategy over n queues: serve at most one of them.
struct StrategyVector {
    std::vector<std::uint8_t> bits;

    static StrategyVector idle(std::size_t n) {
        StrategyVector s;
        s.bits.assign(n, 0);
        return s;
    }
    static StrategyVector serve(std::size_t n, std::size_t queue) {
        StrategyVector s = idle(n);
        s.bits.at(queue) = 1;
        return s;
    }
    // Served queue index, -1 when idle.
    int served() const {
        for (std::size_t i = 0; i < bits.size(); ++i)
            if (bits[i]) return static_cast<int>(i);
        return -1;
    }
    bool valid() const {
        int total = 0;
        for (auto b : bits) total += b;
        return total <= 1;
    }

    bool operator==(const StrategyVector&) const = default;
};

struct UtilityParams {
    // The printed next-step utility mixes the present strategy into the
    // predicted penalty term; the symmetric form applies the present utility
    // shape at the predicted state. Symmetric is the default reading.
    enum class NextForm { Symmetric, Printed };

    std::vector<double> c;  // beneficial coefficients, strictly decreasing
    double beta = 1.0;
    double alpha = 0.5;
    double p0 = 1.0;
    int q_max = 64;
    NextForm next_form = NextForm::Symmetric;

    static UtilityParams defaults(std::size_t n) {
        UtilityParams p;
        for (std::size_t i = 0; i < n; ++i)
            p.c.push_back(static_cast<double>(n - i) / static_cast<double>(n));
        return p;
    }

    void validate() const {
        if (c.empty()) throw SpecError("utility params need at least one coefficient");
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (c[i] <= 0) throw SpecError("beneficial coefficients must be positive");
            if (i > 0 && c[i] >= c[i - 1])
                throw SpecError("beneficial coefficients must strictly decrease");
        }
        if (alpha < 0 || alpha > 1) throw SpecError("alpha must lie in [0, 1]");
        if (beta <= 0) throw SpecError("beta must be positive");
        if (p0 <= 0) throw SpecError("p0 must be positive");
        if (q_max < 2) throw SpecError("q_max must be at least 2");
    }
};

// Three-branch queue-length penalty. The half-full boundary belongs to the
// middle branch.
inline double penalty_factor(double q, int q_max, double p0) {
    if (q < 0) throw SpecError("queue length cannot be negative");
    const double half = static_cast<double>(q_max) / 2.0;
    if (q < half) return 0.0;
    if (q < static_cast<double>(q_max)) return q / static_cast<double>(q_max);
    return p0;
}

// Same shape applied to the backlog expected after the candidate service:
// current backlog plus arrivals expected during the head packet's service.
inline double predicted_penalty_factor(double q, double expected_arrivals, int q_max, double p0) {
    if (expected_arrivals < 0) throw SpecError("expected arrivals cannot be negative");
    return penalty_factor(q + expected_arrivals, q_max, p0);
}

// Exponential moving average of per-queue arrival rates (packets per tick).
struct ArrivalEstimator {
    std::vector<double> rate;  // per tick
    double smoothing = 0.2;

    explicit ArrivalEstimator(std::size_t n = 0) : rate(n, 0.0) {}

    void update(std::size_t queue, std::int64_t arrivals, Tick window) {
        if (window <= 0) throw SpecError("estimator window must be positive");
        const double sample = static_cast<double>(arrivals) / static_cast<double>(window);
        rate.at(queue) = (1.0 - smoothing) * rate.at(queue) + smoothing * sample;
    }

    // Expected arrivals on `queue` over `span` ticks.
    double expected(std::size_t queue, Tick span) const {
        return rate.at(queue) * static_cast<double>(span);
    }
};

inline double present_utility(const StrategyVector& s, const UtilityParams& params,
                              const std::vector<double>& p) {
    double u = 0;
    for (std::size_t i = 0; i < s.bits.size(); ++i) {
        u += params.c.at(i) * s.bits[i];
        u -= params.beta * p.at(i) * (1.0 - s.bits[i]);
    }
    return u;
}

inline double next_utility(const StrategyVector& s, const StrategyVector& s_next,
                           const UtilityParams& params, const std::vector<double>& p_next) {
    if (params.next_form == UtilityParams::NextForm::Symmetric)
        return present_utility(s_next, params, p_next);
    // Printed form: c.s - beta*(p_next - s).(1 - s_next).
    double u = 0;
    for (std::size_t i = 0; i < s.bits.size(); ++i) {
        u += params.c.at(i) * s.bits[i];
        u -= params.beta * (p_next.at(i) - s.bits[i]) * (1.0 - s_next.bits[i]);
    }
    return u;
}

// Mixed utility of a present strategy and its paired next strategy.
inline double utility(const StrategyVector& s, const StrategyVector& s_next,
                      const UtilityParams& params, const std::vector<double>& p,
                      const std::vector<double>& p_next) {
    if (!s.valid() || !s_next.valid()) throw SpecError("strategy may serve at most one queue");
    return params.alpha * present_utility(s, params, p) +
           (1.0 - params.alpha) * next_utility(s, s_next, params, p_next);
}

namespace detail {

// Greedy best response at the predicted state: the feasible next strategy
// maximizing the next-step utility, ties to the lowest queue index, idle
// last.
inline StrategyVector best_next_strategy(const StrategyVector& s, const UtilityParams& params,
                                         const std::vector<double>& p_next,
                                         const std::vector<double>& q_next) {
    const std::size_t n = p_next.size();
    StrategyVector best = StrategyVector::idle(n);
    double best_u = next_utility(s, best, params, p_next);
    for (std::size_t i = 0; i < n; ++i) {
        if (q_next[i] < 1.0) continue;
        StrategyVector cand = StrategyVector::serve(n, i);
        const double u = next_utility(s, cand, params, p_next);
        if (u > best_u) {
            best_u = u;
            best = cand;
        }
    }
    return best;
}

} // namespace detail

// Utility-maximizing strategy for one decision instant. A queue is feasible
// only when its gate is open, it has backlog, and its head packet finishes
// inside the residual slot; candidates are the n feasible serves plus idle.
// Ties resolve to the lowest queue index, idle last.
inline StrategyVector select_strategy(const PortSnapshot& port, const UtilityParams& params,
                                      const ArrivalEstimator& estimator, Tick residual) {
    const std::size_t n = port.queues.size();
    if (params.c.size() != n) throw SpecError("coefficient count must match queue count");
    params.validate();

    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i)
        p[i] = penalty_factor(port.queues[i].backlog, params.q_max, params.p0);

    StrategyVector best = StrategyVector::idle(n);
    double best_u = 0;
    bool have_best = false;

    auto consider = [&](const StrategyVector& s, Tick span) {
        // Predicted state after the candidate action: served queue loses its
        // head, every queue gains the arrivals expected during the service.
        std::vector<double> q_next(n), p_next(n);
        for (std::size_t i = 0; i < n; ++i) {
            double q = port.queues[i].backlog;
            if (s.served() == static_cast<int>(i)) q -= 1.0;
            q_next[i] = q + estimator.expected(i, span);
            p_next[i] = penalty_factor(q_next[i], params.q_max, params.p0);
        }
        StrategyVector s_next = detail::best_next_strategy(s, params, p_next, q_next);
        const double u = utility(s, s_next, params, p, p_next);
        if (!have_best || u > best_u) {
            have_best = true;
            best_u = u;
            best = s;
        }
    };

    for (std::size_t i = 0; i < n; ++i) {
        const QueueState& q = port.queues[i];
        if (!q.gate_open || q.backlog <= 0) continue;
        if (q.head_service_time > residual) continue;
        consider(StrategyVector::serve(n, i), q.head_service_time);
    }
    consider(StrategyVector::idle(n), 0);
    return best;
}

inline nlohmann::json utility_params_to_json(const UtilityParams& p) {
    return {{"alpha", p.alpha}, {"beta", p.beta}, {"p0", p.p0}, {"q_max", p.q_max}, {"c", p.c}};
}

inline UtilityParams utility_params_from_json(const nlohmann::json& j) {
    UtilityParams p;
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "alpha" && it.key() != "beta" && it.key() != "p0" && it.key() != "q_max" &&
            it.key() != "c")
            throw SpecError("unknown key \"" + it.key() + "\" in utility params");
    if (j.contains("alpha")) p.alpha = j.at("alpha").get<double>();
    if (j.contains("beta")) p.beta = j.at("beta").get<double>();
    if (j.contains("p0")) p.p0 = j.at("p0").get<double>();
    if (j.contains("q_max")) p.q_max = j.at("q_max").get<int>();
    if (j.contains("c")) p.c = j.at("c").get<std::vector<double>>();
    return p;
}

} // namespace portsched
