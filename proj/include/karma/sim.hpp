#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "karma/allocate.hpp"
#include "karma/baselines.hpp"
#include "karma/config.hpp"
#include "karma/ledger.hpp"
#include "karma/trace.hpp"

namespace karma {

enum class StrategyKind { truthful, nonconformant, scripted };

struct Strategy {
    StrategyKind kind = StrategyKind::truthful;
    std::vector<std::int64_t> script;  // reported demand per quantum (scripted only)
};

// Users not listed report truthfully.
struct StrategyProfile {
    std::map<UserId, Strategy> by_user;
};

struct Metrics {
    Rat utilization = 0;  // total useful allocation over total admissible demand
    Rat fairness = 1;     // min welfare / max welfare
    bool disparity_finite = true;
    Rat disparity = 1;    // median / min of per-user useful totals
};

struct SimReport {
    PolicyKind policy = PolicyKind::karma;
    std::vector<std::string> users;
    std::int64_t quanta = 0;
    std::int64_t capacity = 0;
    Rat alpha = 0;
    std::vector<std::vector<std::int64_t>> reported;  // [quantum][user]
    std::vector<std::vector<std::int64_t>> alloc;
    std::vector<std::vector<std::int64_t>> useful;    // min(alloc, true demand)
    std::vector<std::vector<Rat>> credits;            // karma only: post-quantum balances
    std::vector<std::int64_t> total_alloc, total_useful, total_demand;
    std::vector<std::optional<Rat>> welfare;          // empty for users with no demand
    Metrics metrics;
};

namespace detail {

inline std::int64_t reported_demand(const StrategyProfile& profile, const Config& cfg, UserId u,
                                    std::int64_t t, std::int64_t true_demand) {
    auto it = profile.by_user.find(u);
    if (it == profile.by_user.end() || it->second.kind == StrategyKind::truthful)
        return true_demand;
    if (it->second.kind == StrategyKind::nonconformant)
        return std::max(true_demand, ceil_i64(cfg.fair_share(u)));
    const auto& script = it->second.script;
    if (t >= static_cast<std::int64_t>(script.size()))
        throw input_error("scripted strategy for user " + std::to_string(u) +
                          " is shorter than the trace");
    if (script[t] < 0) throw input_error("scripted strategy has a negative report");
    return script[t];
}

inline Metrics compute_metrics(const DemandTrace& trace, std::int64_t capacity,
                               const std::vector<std::vector<std::int64_t>>& useful,
                               const std::vector<std::int64_t>& total_useful,
                               const std::vector<std::optional<Rat>>& welfare) {
    Metrics m;
    std::int64_t admissible = 0;
    std::int64_t useful_sum = 0;
    for (std::int64_t t = 0; t < trace.quanta(); ++t) {
        std::int64_t dsum = 0;
        for (std::int64_t u = 0; u < trace.n_users(); ++u) dsum += trace.demand[t][u];
        admissible += std::min(dsum, capacity);
        for (std::int64_t u = 0; u < trace.n_users(); ++u) useful_sum += useful[t][u];
    }
    m.utilization = admissible == 0 ? Rat(1) : Rat(useful_sum) / Rat(admissible);

    std::optional<Rat> wmin, wmax;
    for (const auto& w : welfare) {
        if (!w) continue;
        if (!wmin || *w < *wmin) wmin = *w;
        if (!wmax || *w > *wmax) wmax = *w;
    }
    m.fairness = (!wmax || *wmax == 0) ? Rat(1) : *wmin / *wmax;

    std::vector<std::int64_t> totals = total_useful;
    std::sort(totals.begin(), totals.end());
    if (!totals.empty()) {
        std::size_t n = totals.size();
        Rat median = n % 2 == 1 ? Rat(totals[n / 2])
                                : (Rat(totals[n / 2 - 1]) + Rat(totals[n / 2])) / Rat(2);
        if (totals.front() == 0) {
            m.disparity_finite = median == 0;  // all-zero degenerates to 1
            m.disparity = m.disparity_finite ? Rat(1) : Rat(0);
        } else {
            m.disparity = median / Rat(totals.front());
        }
    }
    return m;
}

}  // namespace detail

// Drives one policy over a demand trace. Allocation sees reported demands;
// useful allocation and all metrics are judged against true demands.
inline SimReport run(const DemandTrace& trace, PolicyKind policy, const Config& cfg,
                     const StrategyProfile& profile = {}) {
    cfg.validate();
    if (cfg.n_users != trace.n_users())
        throw input_error("config is for " + std::to_string(cfg.n_users) + " users, trace has " +
                          std::to_string(trace.n_users()));
    if (trace.quanta() == 0) throw input_error("empty trace");
    for (const auto& [u, s] : profile.by_user)
        if (u < 0 || u >= trace.n_users())
            throw input_error("strategy for unknown user " + std::to_string(u));

    const std::int64_t T = trace.quanta();
    const std::int64_t n = trace.n_users();

    SimReport rep;
    rep.policy = policy;
    rep.users = trace.users;
    rep.quanta = T;
    rep.capacity = cfg.capacity;
    rep.alpha = cfg.alpha;
    rep.reported.assign(T, std::vector<std::int64_t>(n, 0));
    rep.alloc.assign(T, std::vector<std::int64_t>(n, 0));
    rep.useful.assign(T, std::vector<std::int64_t>(n, 0));
    for (std::int64_t t = 0; t < T; ++t)
        for (std::int64_t u = 0; u < n; ++u)
            rep.reported[t][u] = detail::reported_demand(profile, cfg, u, t, trace.demand[t][u]);

    std::vector<Rat> weights;
    if (cfg.weighted())
        for (std::int64_t u = 0; u < n; ++u) weights.push_back(cfg.fair_share(u));

    if (policy == PolicyKind::karma) {
        Ledger led = new_ledger(cfg);
        if (led.credits.begin()->first != 0 || led.credits.rbegin()->first != n - 1)
            throw input_error("karma run requires users indexed 0..n-1");
        rep.credits.assign(T, std::vector<Rat>(n, Rat(0)));
        for (std::int64_t t = 0; t < T; ++t) {
            QuantumDemands demands;
            for (std::int64_t u = 0; u < n; ++u) demands[u] = rep.reported[t][u];
            AllocationResult r = allocate_quantum_batched(led, cfg, demands);
            for (std::int64_t u = 0; u < n; ++u) {
                rep.alloc[t][u] = r.alloc.at(u);
                rep.credits[t][u] = led.credits.at(u);
            }
        }
    } else if (policy == PolicyKind::maxmin_periodic) {
        for (std::int64_t t = 0; t < T; ++t)
            rep.alloc[t] = maxmin_quantum(rep.reported[t], cfg.capacity, weights);
    } else if (policy == PolicyKind::maxmin_static) {
        std::vector<std::int64_t> fixed = maxmin_quantum(rep.reported[0], cfg.capacity, weights);
        for (std::int64_t t = 0; t < T; ++t) rep.alloc[t] = fixed;
    } else {
        for (std::int64_t t = 0; t < T; ++t)
            for (std::int64_t u = 0; u < n; ++u)
                rep.alloc[t][u] = std::min(rep.reported[t][u], floor_i64(cfg.fair_share(u)));
    }

    rep.total_alloc.assign(n, 0);
    rep.total_useful.assign(n, 0);
    rep.total_demand.assign(n, 0);
    for (std::int64_t t = 0; t < T; ++t) {
        for (std::int64_t u = 0; u < n; ++u) {
            rep.useful[t][u] = std::min(rep.alloc[t][u], trace.demand[t][u]);
            rep.total_alloc[u] += rep.alloc[t][u];
            rep.total_useful[u] += rep.useful[t][u];
            rep.total_demand[u] += trace.demand[t][u];
        }
    }
    rep.welfare.assign(n, std::nullopt);
    for (std::int64_t u = 0; u < n; ++u)
        if (rep.total_demand[u] > 0)
            rep.welfare[u] = Rat(rep.total_useful[u]) / Rat(rep.total_demand[u]);
    rep.metrics = detail::compute_metrics(trace, cfg.capacity, rep.useful, rep.total_useful,
                                          rep.welfare);
    return rep;
}

// Welfare each listed user would gain by reporting truthfully instead of
// non-conformantly (everyone else truthful in both runs). Ratio of 1 means
// indifferent; users with no demand at all are reported as 1.
inline std::map<UserId, Rat> welfare_gain_on_conforming(const DemandTrace& trace, const Config& cfg,
                                                        const std::vector<UserId>& nonconformant) {
    if (nonconformant.empty()) throw input_error("welfare gain: empty nonconformant set");
    StrategyProfile profile;
    for (UserId u : nonconformant) profile.by_user[u] = {StrategyKind::nonconformant, {}};
    SimReport before = run(trace, PolicyKind::karma, cfg, profile);
    SimReport after = run(trace, PolicyKind::karma, cfg, {});
    std::map<UserId, Rat> gain;
    for (UserId u : nonconformant) {
        const auto& w0 = before.welfare[u];
        const auto& w1 = after.welfare[u];
        if (!w0 || !w1)
            gain[u] = Rat(1);
        else if (*w0 == 0)
            gain[u] = *w1 == 0 ? Rat(1) : Rat(-1);  // unbounded gain; callers treat < 0 as infinite
        else
            gain[u] = *w1 / *w0;
    }
    return gain;
}

struct CompareRow {
    std::string label;
    PolicyKind policy;
    Rat alpha;
    Metrics metrics;
    std::int64_t total_useful = 0;
    std::int64_t total_alloc = 0;
};

// One row per requested policy; karma repeats per alpha value.
inline std::vector<CompareRow> compare_policies(const DemandTrace& trace, const Config& cfg,
                                                const std::vector<PolicyKind>& policies,
                                                const std::vector<Rat>& alphas = {}) {
    std::vector<CompareRow> rows;
    for (PolicyKind p : policies) {
        std::vector<Rat> variants =
            (p == PolicyKind::karma && !alphas.empty()) ? alphas : std::vector<Rat>{cfg.alpha};
        for (const Rat& a : variants) {
            Config c = cfg;
            c.alpha = a;
            SimReport rep = run(trace, p, c, {});
            CompareRow row;
            row.policy = p;
            row.alpha = a;
            row.label = policy_name(p);
            if (p == PolicyKind::karma && variants.size() > 1)
                row.label += "[alpha=" + rat_to_string(a) + "]";
            row.metrics = rep.metrics;
            for (std::int64_t u = 0; u < trace.n_users(); ++u) {
                row.total_useful += rep.total_useful[u];
                row.total_alloc += rep.total_alloc[u];
            }
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace karma
