#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "karma/allocate.hpp"
#include "karma/config.hpp"
#include "karma/ledger.hpp"
#include "karma/sim.hpp"
#include "karma/trace.hpp"

namespace karma {

// Ground-truth reference for the allocators: the credit scheme transliterated
// line by line, linear scans everywhere, one slice per loop iteration.
// Deliberately primitive; the production allocators are tested against it.
inline AllocationResult naive_allocate(Ledger& led, const Config& cfg,
                                       const QuantumDemands& demands) {
    cfg.validate();
    if (led.n_users() != cfg.n_users)
        throw input_error("ledger and config disagree on the user count");
    for (const auto& [u, d] : demands) {
        if (!led.registered(u)) throw input_error("demand for unregistered user " + std::to_string(u));
        if (d < 0) throw input_error("negative demand for user " + std::to_string(u));
    }
    auto demand_of = [&](UserId u) {
        auto it = demands.find(u);
        return it == demands.end() ? std::int64_t(0) : it->second;
    };
    auto eligible = [&](UserId u) {
        const Rat& c = led.credits.at(u);
        return cfg.weighted() ? c > 0 : c >= 1;
    };

    AllocationResult res;
    std::map<UserId, Rat> before = led.credits;
    std::map<UserId, std::int64_t> donated;
    std::int64_t shared = cfg.capacity;
    std::int64_t donated_total = 0;
    for (auto& [u, credits] : led.credits) {
        credits += cfg.free_credit();
        std::int64_t g = cfg.guaranteed(u);
        std::int64_t d = demand_of(u);
        shared -= g;
        res.alloc[u] = std::min(d, g);
        donated[u] = std::max<std::int64_t>(0, g - d);
        donated_total += donated[u];
        res.donated_used[u] = 0;
        res.borrowed[u] = 0;
    }

    while (true) {
        if (donated_total <= 0 && shared <= 0) break;
        // Richest borrower, smallest id on ties.
        bool have_b = false;
        UserId b = 0;
        for (const auto& [u, c] : led.credits) {
            if (res.alloc.at(u) >= demand_of(u) || !eligible(u)) continue;
            if (!have_b || c > led.credits.at(b)) {
                b = u;
                have_b = true;
            }
        }
        if (!have_b) break;
        if (donated_total > 0) {
            // Poorest donor, smallest id on ties.
            bool have_d = false;
            UserId d = 0;
            for (const auto& [u, c] : led.credits) {
                if (donated.at(u) <= 0) continue;
                if (!have_d || c < led.credits.at(d)) {
                    d = u;
                    have_d = true;
                }
            }
            led.credits.at(d) += 1;
            donated.at(d) -= 1;
            donated_total -= 1;
            res.donated_used.at(d) += 1;
        } else {
            shared -= 1;
            res.shared_used += 1;
        }
        res.alloc.at(b) += 1;
        res.borrowed.at(b) += 1;
        led.credits.at(b) -= cfg.borrow_charge(b);
    }

    led.rate.clear();
    for (auto& [u, credits] : led.credits) {
        Rat delta = credits - before.at(u);
        res.credit_delta[u] = delta;
        if (delta != 0) led.rate[u] = delta;
        led.cumulative_alloc.at(u) += res.alloc.at(u);
        res.satisfied[u] = res.alloc.at(u) == demand_of(u);
    }
    led.quantum_index += 1;
    return res;
}

// Pareto efficiency of one quantum against reported demands: nobody got more
// than asked, and either the pool is exhausted or everyone is satisfied.
inline bool check_pareto(const std::vector<std::int64_t>& alloc,
                         const std::vector<std::int64_t>& demands, std::int64_t capacity) {
    if (alloc.size() != demands.size()) throw input_error("check_pareto: size mismatch");
    std::int64_t total = 0;
    bool all_met = true;
    for (std::size_t u = 0; u < alloc.size(); ++u) {
        if (alloc[u] > demands[u]) return false;
        all_met = all_met && alloc[u] == demands[u];
        total += alloc[u];
    }
    return all_met || total == capacity;
}

// Best achievable min cumulative allocation for one quantum: maximum over all
// Pareto-efficient integral allocations a (a <= d, sum = min(sum d, capacity))
// of min_u(R_u + a_u). Brute force; refuses instances beyond n=5, capacity=10.
inline std::int64_t maximin_oracle(const std::vector<std::int64_t>& R,
                                   const std::vector<std::int64_t>& demands,
                                   std::int64_t capacity) {
    if (R.size() != demands.size()) throw input_error("maximin oracle: size mismatch");
    if (demands.size() > 5 || capacity > 10)
        throw budget_error("maximin oracle is exhaustive; limited to n <= 5, capacity <= 10");
    std::int64_t target = 0;
    for (auto d : demands) {
        if (d < 0) throw input_error("maximin oracle: negative demand");
        target += d;
    }
    target = std::min(target, capacity);

    std::size_t n = demands.size();
    std::vector<std::int64_t> tail(n + 1, 0);  // demand left from user u on
    for (std::size_t u = n; u-- > 0;) tail[u] = tail[u + 1] + demands[u];

    std::int64_t best = -1;
    std::vector<std::int64_t> a(n, 0);
    auto rec = [&](auto&& self, std::size_t u, std::int64_t left, std::int64_t low) -> void {
        if (u == n) {
            best = std::max(best, low);
            return;
        }
        std::int64_t hi = std::min(demands[u], left);
        std::int64_t lo = std::max<std::int64_t>(0, left - tail[u + 1]);
        for (std::int64_t x = lo; x <= hi; ++x)
            self(self, u + 1, left - x, std::min(low, R[u] + x));
    };
    std::int64_t inf = std::numeric_limits<std::int64_t>::max();
    rec(rec, 0, target, inf);
    return best == -1 ? inf : best;  // n = 0 degenerates to +inf, callers never do that
}

struct DeviationSpace {
    std::int64_t report_cap = -1;        // over-reports range up to this; -1 = trace max demand
    std::uint64_t budget = 1'000'000;    // max candidate report vectors per search
};

struct DeviationReport {
    std::int64_t truthful = 0;           // useful allocation when honest
    std::int64_t best_over = 0;
    std::int64_t best_under = 0;
    std::vector<std::int64_t> best_over_report;
    std::vector<std::int64_t> best_under_report;
    std::uint64_t over_candidates = 0;
    std::uint64_t under_candidates = 0;
};

namespace detail {

inline std::int64_t useful_total_scripted(const DemandTrace& trace, const Config& cfg,
                                          const std::map<UserId, std::vector<std::int64_t>>& scripts,
                                          UserId score_user) {
    StrategyProfile profile;
    for (const auto& [u, script] : scripts)
        profile.by_user[u] = {StrategyKind::scripted, script};
    SimReport rep = run(trace, PolicyKind::karma, cfg, profile);
    return rep.total_useful[score_user];
}

// Odometer over per-quantum candidate ranges [lo_t, hi_t]. Calls fn for every
// vector; counts them against the budget up front.
inline std::uint64_t space_size(const std::vector<std::int64_t>& lo,
                                const std::vector<std::int64_t>& hi, std::uint64_t budget) {
    std::uint64_t size = 1;
    for (std::size_t t = 0; t < lo.size(); ++t) {
        std::uint64_t width = static_cast<std::uint64_t>(hi[t] - lo[t] + 1);
        if (size > budget / width + 1) return budget + 1;  // saturate, avoids overflow
        size *= width;
        if (size > budget) return size;
    }
    return size;
}

template <typename Fn>
inline void for_each_vector(const std::vector<std::int64_t>& lo,
                            const std::vector<std::int64_t>& hi, Fn&& fn) {
    std::vector<std::int64_t> v = lo;
    while (true) {
        fn(v);
        std::size_t t = 0;
        for (; t < v.size(); ++t) {
            if (v[t] < hi[t]) {
                v[t] += 1;
                for (std::size_t i = 0; i < t; ++i) v[i] = lo[i];
                break;
            }
        }
        if (t == v.size()) break;
    }
}

}  // namespace detail

// Exhaustive search over one user's misreports, everyone else truthful.
// Over-reporting tries every vector with report >= true demand per quantum;
// under-reporting every vector with report <= true demand. The trace's karma
// config must have alpha = 0 (the strategyproofness setting); the credit pool
// must be deep enough that the search is about reports, not bankruptcy.
inline DeviationReport deviation_search(const DemandTrace& trace, const Config& cfg, UserId user,
                                        const DeviationSpace& space = {}) {
    if (cfg.alpha != 0)
        throw input_error("deviation search requires alpha = 0 (guarantees hold at alpha 0)");
    if (user < 0 || user >= trace.n_users()) throw input_error("deviation search: unknown user");

    const std::int64_t T = trace.quanta();
    std::int64_t cap_report = space.report_cap;
    if (cap_report < 0)
        for (const auto& row : trace.demand)
            for (auto d : row) cap_report = std::max(cap_report, d);

    DeviationReport rep;
    rep.truthful = detail::useful_total_scripted(trace, cfg, {}, user);

    std::vector<std::int64_t> truth(T);
    for (std::int64_t t = 0; t < T; ++t) truth[t] = trace.demand[t][user];

    auto search = [&](const std::vector<std::int64_t>& lo, const std::vector<std::int64_t>& hi,
                      std::int64_t& best, std::vector<std::int64_t>& best_report,
                      std::uint64_t& count) {
        std::uint64_t size = detail::space_size(lo, hi, space.budget);
        if (size > space.budget)
            throw budget_error("deviation search space exceeds budget of " +
                               std::to_string(space.budget));
        best = -1;
        detail::for_each_vector(lo, hi, [&](const std::vector<std::int64_t>& report) {
            std::int64_t got = detail::useful_total_scripted(trace, cfg, {{user, report}}, user);
            ++count;
            if (got > best) {
                best = got;
                best_report = report;
            }
        });
    };

    std::vector<std::int64_t> hi_over(T, std::max<std::int64_t>(0, cap_report));
    for (std::int64_t t = 0; t < T; ++t) hi_over[t] = std::max(hi_over[t], truth[t]);
    search(truth, hi_over, rep.best_over, rep.best_over_report, rep.over_candidates);

    std::vector<std::int64_t> lo_under(T, 0);
    search(lo_under, truth, rep.best_under, rep.best_under_report, rep.under_candidates);
    return rep;
}

struct CollusionReport {
    std::int64_t truthful = 0;  // joint useful allocation of the pair when honest
    std::int64_t best_over = 0;
    std::int64_t best_under = 0;
    std::uint64_t over_candidates = 0;
    std::uint64_t under_candidates = 0;
};

// Joint exhaustive search over a colluding pair's reports.
inline CollusionReport collusion_spotcheck(const DemandTrace& trace, const Config& cfg, UserId u1,
                                           UserId u2, const DeviationSpace& space = {}) {
    if (cfg.alpha != 0) throw input_error("collusion spotcheck requires alpha = 0");
    if (u1 == u2) throw input_error("collusion spotcheck needs two distinct users");
    for (UserId u : {u1, u2})
        if (u < 0 || u >= trace.n_users()) throw input_error("collusion spotcheck: unknown user");

    const std::int64_t T = trace.quanta();
    std::int64_t cap_report = space.report_cap;
    if (cap_report < 0)
        for (const auto& row : trace.demand)
            for (auto d : row) cap_report = std::max(cap_report, d);

    auto joint_useful = [&](const std::map<UserId, std::vector<std::int64_t>>& scripts) {
        StrategyProfile profile;
        for (const auto& [u, script] : scripts)
            profile.by_user[u] = {StrategyKind::scripted, script};
        SimReport rep = run(trace, PolicyKind::karma, cfg, profile);
        return rep.total_useful[u1] + rep.total_useful[u2];
    };

    CollusionReport rep;
    rep.truthful = joint_useful({});

    // The pair's joint space is the product of both users' per-quantum ranges:
    // treat it as one 2T-long odometer.
    auto search = [&](bool over, std::int64_t& best, std::uint64_t& count) {
        std::vector<std::int64_t> lo(2 * T), hi(2 * T);
        for (std::int64_t t = 0; t < T; ++t) {
            std::int64_t d1 = trace.demand[t][u1], d2 = trace.demand[t][u2];
            lo[t] = over ? d1 : 0;
            hi[t] = over ? std::max(d1, cap_report) : d1;
            lo[T + t] = over ? d2 : 0;
            hi[T + t] = over ? std::max(d2, cap_report) : d2;
        }
        std::uint64_t size = detail::space_size(lo, hi, space.budget);
        if (size > space.budget)
            throw budget_error("collusion search space exceeds budget of " +
                               std::to_string(space.budget));
        best = -1;
        detail::for_each_vector(lo, hi, [&](const std::vector<std::int64_t>& v) {
            std::map<UserId, std::vector<std::int64_t>> scripts;
            scripts[u1] = std::vector<std::int64_t>(v.begin(), v.begin() + T);
            scripts[u2] = std::vector<std::int64_t>(v.begin() + T, v.end());
            std::int64_t got = joint_useful(scripts);
            ++count;
            best = std::max(best, got);
        });
    };
    search(true, rep.best_over, rep.over_candidates);
    search(false, rep.best_under, rep.under_candidates);
    return rep;
}

// ---- randomized verification suites (shared by `verify` and the tests) ----

struct PropertyResult {
    std::string name;
    bool pass = true;
    std::uint64_t checked = 0;
    std::string detail;  // counterexample description when pass is false
};

namespace detail {

inline std::int64_t rand_in(std::mt19937_64& eng, std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(eng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline DemandTrace random_trace(std::mt19937_64& eng, std::int64_t n, std::int64_t T,
                                std::int64_t d_max) {
    DemandTrace trace;
    for (std::int64_t u = 0; u < n; ++u) trace.users.push_back("u" + std::to_string(u));
    trace.demand.assign(T, std::vector<std::int64_t>(n, 0));
    for (auto& row : trace.demand)
        for (auto& d : row) d = rand_in(eng, 0, d_max);
    return trace;
}

inline std::string describe_instance(const DemandTrace& trace, const Config& cfg) {
    std::ostringstream os;
    os << "n=" << trace.n_users() << " T=" << trace.quanta() << " f="
       << rat_to_string(cfg.uniform_share) << " alpha=" << rat_to_string(cfg.alpha) << " demands=[";
    for (std::int64_t t = 0; t < trace.quanta(); ++t) {
        os << (t ? ";" : "");
        for (std::int64_t u = 0; u < trace.n_users(); ++u)
            os << (u ? "," : "") << trace.demand[t][u];
    }
    os << "]";
    return os.str();
}

}  // namespace detail

// While nobody's credits run out, every quantum's allocation is Pareto
// efficient with respect to the reported demands.
inline PropertyResult verify_pareto(std::uint64_t seed, std::uint64_t instances = 100) {
    std::mt19937_64 eng(seed);
    PropertyResult res{"pareto", true, 0, ""};
    for (std::uint64_t i = 0; i < instances; ++i) {
        std::int64_t n = detail::rand_in(eng, 1, 5);
        std::int64_t T = detail::rand_in(eng, 1, 5);
        std::int64_t f = detail::rand_in(eng, 1, 3);
        std::int64_t alpha_pick = detail::rand_in(eng, 0, 2);
        Rat alpha = alpha_pick == 0 ? Rat(0) : alpha_pick == 1 ? rat(1, 2) : Rat(1);
        DemandTrace trace = detail::random_trace(eng, n, T, 2 * f + 2);
        Config cfg = make_uniform_config(n, Rat(f), alpha, Rat(1'000'000));
        SimReport rep = run(trace, PolicyKind::karma, cfg, {});
        for (std::int64_t t = 0; t < T; ++t) {
            ++res.checked;
            if (!check_pareto(rep.alloc[t], rep.reported[t], cfg.capacity)) {
                res.pass = false;
                res.detail = "quantum " + std::to_string(t) + " of " +
                             detail::describe_instance(trace, cfg);
                return res;
            }
        }
    }
    return res;
}

// Over-reporting never increases useful allocation (ratio <= 1, exactly).
inline PropertyResult verify_lemma1(std::uint64_t seed, std::uint64_t instances = 200,
                                    std::uint64_t budget = 1'000'000) {
    std::mt19937_64 eng(seed);
    PropertyResult res{"lemma1", true, 0, ""};
    for (std::uint64_t i = 0; i < instances; ++i) {
        std::int64_t n = detail::rand_in(eng, 2, 4);
        std::int64_t T = detail::rand_in(eng, 1, 4);
        std::int64_t f = detail::rand_in(eng, 1, 4);
        DemandTrace trace = detail::random_trace(eng, n, T, 4);
        Config cfg = make_uniform_config(n, Rat(f), Rat(0), Rat(1'000'000));
        UserId user = detail::rand_in(eng, 0, n - 1);
        DeviationSpace space;
        space.report_cap = 4;
        space.budget = budget;
        DeviationReport dev = deviation_search(trace, cfg, user, space);
        res.checked += dev.over_candidates;
        if (dev.best_over > dev.truthful) {
            res.pass = false;
            res.detail = "user " + std::to_string(user) + " gains " +
                         std::to_string(dev.best_over) + " > " + std::to_string(dev.truthful) +
                         " by over-reporting on " + detail::describe_instance(trace, cfg);
            return res;
        }
    }
    return res;
}

// Under-reporting gains at most 1.5x uniform, 2x weighted. Exact integer
// comparisons; no tolerances.
inline PropertyResult verify_lemma2(std::uint64_t seed, std::uint64_t instances = 200,
                                    std::uint64_t budget = 1'000'000) {
    std::mt19937_64 eng(seed);
    PropertyResult res{"lemma2", true, 0, ""};
    for (std::uint64_t i = 0; i < instances; ++i) {
        std::int64_t n = detail::rand_in(eng, 2, 4);
        std::int64_t T = detail::rand_in(eng, 1, 4);
        std::int64_t f = detail::rand_in(eng, 1, 4);
        DemandTrace trace = detail::random_trace(eng, n, T, 4);
        Config cfg = make_uniform_config(n, Rat(f), Rat(0), Rat(1'000'000));
        UserId user = detail::rand_in(eng, 0, n - 1);
        DeviationSpace space;
        space.report_cap = 4;
        space.budget = budget;
        DeviationReport dev = deviation_search(trace, cfg, user, space);
        res.checked += dev.under_candidates;
        if (2 * dev.best_under > 3 * dev.truthful) {
            res.pass = false;
            res.detail = "user " + std::to_string(user) + " reaches " +
                         std::to_string(dev.best_under) + " vs truthful " +
                         std::to_string(dev.truthful) + " (over 1.5x) on " +
                         detail::describe_instance(trace, cfg);
            return res;
        }
    }
    // Weighted spot checks: same bound family, factor 2.
    for (std::uint64_t i = 0; i < std::max<std::uint64_t>(1, instances / 8); ++i) {
        std::int64_t n = detail::rand_in(eng, 2, 3);
        std::int64_t T = detail::rand_in(eng, 1, 3);
        DemandTrace trace = detail::random_trace(eng, n, T, 4);
        std::map<UserId, Rat> shares;
        for (std::int64_t u = 0; u < n; ++u) shares[u] = Rat(detail::rand_in(eng, 1, 4));
        Config cfg = make_weighted_config(shares, Rat(0), Rat(1'000'000));
        UserId user = detail::rand_in(eng, 0, n - 1);
        DeviationSpace space;
        space.report_cap = 4;
        space.budget = budget;
        DeviationReport dev = deviation_search(trace, cfg, user, space);
        res.checked += dev.under_candidates;
        if (dev.best_under > 2 * dev.truthful) {
            res.pass = false;
            res.detail = "weighted: user " + std::to_string(user) + " reaches " +
                         std::to_string(dev.best_under) + " vs truthful " +
                         std::to_string(dev.truthful) + " (over 2x) on " +
                         detail::describe_instance(trace, cfg);
            return res;
        }
    }
    return res;
}

// Karma maximizes the minimum cumulative allocation quantum by quantum
// (alpha = 0), checked against the brute-force oracle.
inline PropertyResult verify_theorem5(std::uint64_t seed, std::uint64_t quanta = 500) {
    std::mt19937_64 eng(seed);
    PropertyResult res{"theorem5", true, 0, ""};
    while (res.checked < quanta) {
        std::int64_t n = detail::rand_in(eng, 2, 5);
        std::int64_t f = detail::rand_in(eng, 1, 10 / n);
        std::int64_t T = detail::rand_in(eng, 1, 5);
        DemandTrace trace = detail::random_trace(eng, n, T, 2 * f + 3);
        Config cfg = make_uniform_config(n, Rat(f), Rat(0), Rat(1'000'000));
        Ledger led = new_ledger(cfg);
        std::vector<std::int64_t> R(n, 0);
        for (std::int64_t t = 0; t < T && res.checked < quanta; ++t) {
            QuantumDemands demands;
            for (std::int64_t u = 0; u < n; ++u) demands[u] = trace.demand[t][u];
            AllocationResult r = allocate_quantum_batched(led, cfg, demands);
            std::int64_t want = maximin_oracle(R, trace.demand[t], cfg.capacity);
            for (std::int64_t u = 0; u < n; ++u) R[u] += r.alloc.at(u);
            std::int64_t got = *std::min_element(R.begin(), R.end());
            ++res.checked;
            if (got != want) {
                res.pass = false;
                res.detail = "quantum " + std::to_string(t) + ": min cumulative " +
                             std::to_string(got) + " vs oracle " + std::to_string(want) + " on " +
                             detail::describe_instance(trace, cfg);
                return res;
            }
        }
    }
    return res;
}

// No colluding pair improves its joint useful allocation by over-reporting,
// nor beyond 2x by under-reporting.
inline PropertyResult verify_collusion(std::uint64_t seed, std::uint64_t instances = 12,
                                       std::uint64_t budget = 4'000'000) {
    std::mt19937_64 eng(seed);
    PropertyResult res{"collusion", true, 0, ""};
    for (std::uint64_t i = 0; i < instances; ++i) {
        std::int64_t n = detail::rand_in(eng, 2, 4);
        std::int64_t T = detail::rand_in(eng, 1, 2);
        std::int64_t f = detail::rand_in(eng, 1, 3);
        DemandTrace trace = detail::random_trace(eng, n, T, 3);
        Config cfg = make_uniform_config(n, Rat(f), Rat(0), Rat(1'000'000));
        UserId u1 = detail::rand_in(eng, 0, n - 1);
        UserId u2 = (u1 + 1 + detail::rand_in(eng, 0, n - 2)) % n;
        DeviationSpace space;
        space.report_cap = 3;
        space.budget = budget;
        CollusionReport col = collusion_spotcheck(trace, cfg, u1, u2, space);
        res.checked += col.over_candidates + col.under_candidates;
        if (col.best_over > col.truthful || col.best_under > 2 * col.truthful) {
            res.pass = false;
            res.detail = "pair (" + std::to_string(u1) + "," + std::to_string(u2) +
                         ") truthful " + std::to_string(col.truthful) + " over " +
                         std::to_string(col.best_over) + " under " +
                         std::to_string(col.best_under) + " on " +
                         detail::describe_instance(trace, cfg);
            return res;
        }
    }
    return res;
}

}  // namespace karma
