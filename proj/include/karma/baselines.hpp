#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "karma/rational.hpp"

namespace karma {

enum class PolicyKind { karma, maxmin_periodic, maxmin_static, strict };

inline std::string policy_name(PolicyKind p) {
    switch (p) {
        case PolicyKind::karma: return "karma";
        case PolicyKind::maxmin_periodic: return "maxmin";
        case PolicyKind::maxmin_static: return "maxmin-t0";
        case PolicyKind::strict: return "strict";
    }
    return "?";
}

inline PolicyKind parse_policy(const std::string& s) {
    if (s == "karma") return PolicyKind::karma;
    if (s == "maxmin") return PolicyKind::maxmin_periodic;
    if (s == "maxmin-t0" || s == "maxmin-static") return PolicyKind::maxmin_static;
    if (s == "strict") return PolicyKind::strict;
    throw input_error("unknown policy '" + s + "' (expected karma|maxmin|maxmin-t0|strict)");
}

// Classic max-min fairness for a single quantum: raise every unsatisfied
// user's level equally (proportionally to weight when weighted) until demand
// or capacity runs out. Solved exactly in the fluid model, floored to whole
// slices, remainder handed out one slice at a time in user-id order.
inline std::vector<std::int64_t> maxmin_quantum(const std::vector<std::int64_t>& demands,
                                                std::int64_t capacity,
                                                const std::vector<Rat>& weights = {}) {
    std::size_t n = demands.size();
    if (!weights.empty() && weights.size() != n)
        throw input_error("maxmin: weight count differs from demand count");
    for (std::size_t u = 0; u < n; ++u) {
        if (demands[u] < 0) throw input_error("maxmin: negative demand");
        if (!weights.empty() && weights[u] <= 0) throw input_error("maxmin: weights must be positive");
    }
    if (capacity < 0) throw input_error("maxmin: negative capacity");

    std::int64_t demand_sum = 0;
    for (auto d : demands) demand_sum += d;
    std::int64_t target = std::min(demand_sum, capacity);

    // Fluid solution: alloc_u = min(d_u, level * w_u) with allocations summing
    // to target. Users saturate in order of d_u / w_u.
    auto weight_of = [&](std::size_t u) { return weights.empty() ? Rat(1) : weights[u]; };
    std::vector<std::size_t> order(n);
    for (std::size_t u = 0; u < n; ++u) order[u] = u;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return Rat(demands[a]) / weight_of(a) < Rat(demands[b]) / weight_of(b);
    });

    std::vector<Rat> fluid(n, Rat(0));
    Rat remaining(target);
    Rat active_weight = 0;
    for (std::size_t u = 0; u < n; ++u) active_weight += weight_of(u);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t u = order[i];
        Rat level = remaining / active_weight;  // per unit weight
        if (Rat(demands[u]) / weight_of(u) <= level) {
            fluid[u] = Rat(demands[u]);
        } else {
            // Nobody later in the order saturates either; they all sit at level.
            for (std::size_t j = i; j < n; ++j) fluid[order[j]] = level * weight_of(order[j]);
            remaining = 0;
            break;
        }
        remaining -= fluid[u];
        active_weight -= weight_of(u);
    }

    std::vector<std::int64_t> alloc(n, 0);
    std::int64_t used = 0;
    for (std::size_t u = 0; u < n; ++u) {
        alloc[u] = floor_i64(fluid[u]);
        used += alloc[u];
    }
    std::int64_t leftover = target - used;
    while (leftover > 0) {
        bool progressed = false;
        for (std::size_t u = 0; u < n && leftover > 0; ++u) {
            if (alloc[u] < demands[u]) {
                alloc[u] += 1;
                leftover -= 1;
                progressed = true;
            }
        }
        if (!progressed) break;  // target already equals total demand, cannot happen
    }
    return alloc;
}

// Max-min decided once from the demands at t = 0 and held for the whole run.
// Returns the fixed allocation vector; per-quantum useful allocation is the
// elementwise min with that quantum's true demand.
inline std::vector<std::int64_t> maxmin_static_t0(
    const std::vector<std::vector<std::int64_t>>& demand_matrix, std::int64_t capacity,
    const std::vector<Rat>& weights = {}) {
    if (demand_matrix.empty()) throw input_error("maxmin-t0: empty trace");
    return maxmin_quantum(demand_matrix[0], capacity, weights);
}

// Strict partitioning: every user is confined to its own share.
inline std::vector<std::int64_t> strict_partition(const std::vector<std::int64_t>& demands,
                                                  const std::vector<Rat>& fair_shares) {
    if (demands.size() != fair_shares.size())
        throw input_error("strict: share count differs from demand count");
    std::vector<std::int64_t> alloc(demands.size(), 0);
    for (std::size_t u = 0; u < demands.size(); ++u) {
        if (demands[u] < 0) throw input_error("strict: negative demand");
        alloc[u] = std::min(demands[u], floor_i64(fair_shares[u]));
    }
    return alloc;
}

}  // namespace karma
