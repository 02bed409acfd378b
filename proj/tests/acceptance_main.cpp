// Acceptance gate. One line per criterion; exact integer and rational checks,
// wall-clock budgets pinned where the criterion states one.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "karma/karma.hpp"

namespace {

struct check_failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
    if (!ok) throw check_failure(what);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename F>
double best_of_ms(int reps, F&& f) {
    double best = 1e100;
    for (int i = 0; i < reps; ++i) {
        auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, seconds_since(t0) * 1e3);
    }
    return best;
}

using i64 = std::int64_t;
using ivec = std::vector<i64>;

karma::StrategyProfile script_for(karma::UserId u, ivec reports) {
    karma::StrategyProfile p;
    p.by_user[u] = {karma::StrategyKind::scripted, std::move(reports)};
    return p;
}

// 1. Running example: totals (8,8,8) and the full credit trajectory, < 1 ms.
void criterion1() {
    karma::Example ex = karma::gen_example("fig4");
    karma::SimReport rep;
    double ms = best_of_ms(5, [&] {
        rep = karma::run(ex.trace, karma::PolicyKind::karma, ex.config, {});
    });
    expect(rep.total_alloc == ivec{8, 8, 8}, "allocation totals");
    expect(rep.total_useful == ivec{8, 8, 8}, "useful totals");
    const i64 credits[5][3] = {{5, 6, 7}, {4, 8, 9}, {6, 7, 11}, {7, 8, 9}, {8, 8, 8}};
    for (int t = 0; t < 5; ++t)
        for (int u = 0; u < 3; ++u)
            expect(rep.credits[t][u] == karma::Rat(credits[t][u]),
                   "credits at quantum " + std::to_string(t));
    expect(ms < 1.0, "runtime " + std::to_string(ms) + " ms");
}

// 2. Periodic max-min totals (10,9,5); static-t0 user C 3 honest, 5 misreporting.
void criterion2() {
    karma::Example ex = karma::gen_example("fig3");
    karma::SimReport mm = karma::run(ex.trace, karma::PolicyKind::maxmin_periodic, ex.config, {});
    expect(mm.total_alloc == ivec{10, 9, 5}, "periodic max-min totals");
    expect(mm.total_useful == ivec{10, 9, 5}, "periodic max-min useful totals");

    karma::SimReport honest =
        karma::run(ex.trace, karma::PolicyKind::maxmin_static, ex.config, {});
    expect(honest.total_useful[2] == 3, "static-t0 honest C total");
    karma::SimReport gamed = karma::run(ex.trace, karma::PolicyKind::maxmin_static, ex.config,
                                        script_for(2, {2, 2, 2, 2, 2}));
    expect(gamed.total_useful[2] == 5, "static-t0 misreporting C total");
}

// 3. Worst-case instance: periodic max-min disparity exactly n+1.
void criterion3() {
    for (i64 n : {3, 5, 8}) {
        karma::Example ex = karma::gen_example("maxmin-worstcase", n);
        karma::SimReport rep =
            karma::run(ex.trace, karma::PolicyKind::maxmin_periodic, ex.config, {});
        i64 mn = *std::min_element(rep.total_alloc.begin(), rep.total_alloc.end());
        i64 mx = *std::max_element(rep.total_alloc.begin(), rep.total_alloc.end());
        expect(mn >= 1, "positive minimum at n=" + std::to_string(n));
        expect(mx == (n + 1) * mn, "disparity at n=" + std::to_string(n));
    }
}

// 4. Strategic instances: gain 9 -> 10, loss 12 -> 4, exact.
void criterion4() {
    karma::Example gain = karma::gen_example("fig6-gain");
    expect(karma::run(gain.trace, karma::PolicyKind::karma, gain.config, {}).total_useful[0] == 9,
           "gain instance truthful");
    expect(karma::run(gain.trace, karma::PolicyKind::karma, gain.config,
                      script_for(0, {0, 8, 8}))
                   .total_useful[0] == 10,
           "gain instance scripted");

    karma::Example loss = karma::gen_example("fig6-loss");
    expect(karma::run(loss.trace, karma::PolicyKind::karma, loss.config, {}).total_useful[0] == 12,
           "loss instance truthful");
    expect(karma::run(loss.trace, karma::PolicyKind::karma, loss.config,
                      script_for(0, {0, 8, 8}))
                   .total_useful[0] == 4,
           "loss instance scripted");
}

// 5. table1/table2 at n=8: 9 vs 10, and 10 vs 2.
void criterion5() {
    karma::Example t1 = karma::gen_example("table1", 8);
    karma::DeviationReport dev = karma::deviation_search(t1.trace, t1.config, 0, {});
    expect(dev.truthful == 9, "table 1 truthful");
    expect(dev.best_under == 10, "table 1 best deviation");

    karma::Example t2 = karma::gen_example("table2", 8);
    expect(karma::run(t2.trace, karma::PolicyKind::karma, t2.config, {}).total_useful[0] == 10,
           "table 2 truthful");
    expect(karma::run(t2.trace, karma::PolicyKind::karma, t2.config,
                      script_for(0, {0, 8, 8}))
                   .total_useful[0] == 2,
           "table 2 scripted");
}

// 6. Exhaustive deviation suites: over-report ratio <= 1, under-report <= 1.5.
void criterion6() {
    auto t0 = std::chrono::steady_clock::now();
    karma::PropertyResult l1 = karma::verify_lemma1(42, 200);
    expect(l1.pass, "over-reporting: " + l1.detail);
    karma::PropertyResult l2 = karma::verify_lemma2(42, 200);
    expect(l2.pass, "under-reporting: " + l2.detail);
    expect(seconds_since(t0) < 300.0, "runtime over 5 minutes");
}

// 7. Min cumulative allocation equals the brute-force maximin optimum.
void criterion7() {
    auto t0 = std::chrono::steady_clock::now();
    karma::PropertyResult th = karma::verify_theorem5(42, 500);
    expect(th.pass, th.detail);
    expect(th.checked >= 500, "checked " + std::to_string(th.checked) + " quanta");
    expect(seconds_since(t0) < 120.0, "runtime over 2 minutes");
}

// 8. Batched allocator is bit-exact against the naive loop, 10,000 instances.
void criterion8() {
    std::mt19937_64 eng(8);
    const karma::Rat alphas[4] = {karma::Rat(0), karma::rat(1, 4), karma::rat(1, 2),
                                  karma::Rat(1)};
    for (int i = 0; i < 10'000; ++i) {
        i64 n = 1 + static_cast<i64>(eng() % 6);
        karma::Rat alpha = alphas[eng() % 4];
        karma::Config cfg;
        if (eng() % 3 == 0) {
            std::map<karma::UserId, karma::Rat> shares;
            karma::Rat sum = 0;
            for (i64 u = 0; u + 1 < n; ++u) {
                shares[u] = karma::rat(1 + static_cast<i64>(eng() % 6),
                                       1 + static_cast<i64>(eng() % 2));
                sum += shares[u];
            }
            shares[n - 1] = karma::Rat(karma::ceil_i64(sum) + 1) - sum;
            cfg = karma::make_weighted_config(shares, alpha, karma::Rat(0));
        } else {
            cfg = karma::make_uniform_config(n, karma::Rat(1 + static_cast<i64>(eng() % 4)),
                                             alpha, karma::Rat(0));
        }
        karma::Ledger base = karma::new_ledger(cfg);
        karma::QuantumDemands demands;
        for (auto& [u, c] : base.credits) {
            c = karma::rat(static_cast<i64>(eng() % 41) - 20, 1 + static_cast<i64>(eng() % 3));
            demands[u] = static_cast<i64>(eng() % 10);
        }
        karma::Ledger led_loop = base, led_batch = base, led_naive = base;
        karma::AllocationResult r_loop = karma::allocate_quantum(led_loop, cfg, demands);
        karma::AllocationResult r_batch = karma::allocate_quantum_batched(led_batch, cfg, demands);
        karma::AllocationResult r_naive = karma::naive_allocate(led_naive, cfg, demands);
        expect(r_batch == r_naive && led_batch == led_naive,
               "batched vs naive diverge at instance " + std::to_string(i));
        expect(r_loop == r_naive && led_loop == led_naive,
               "loop vs naive diverge at instance " + std::to_string(i));
    }
}

// 9. Synthetic workload: same utilization as periodic max-min, better fairness,
//    fairness non-increasing in alpha.
void criterion9() {
    auto t0 = std::chrono::steady_clock::now();
    karma::DemandTrace trace = karma::gen_synthetic(100, 900, {}, 42);
    auto config_at = [&](karma::Rat alpha) {
        return karma::make_uniform_config(100, karma::Rat(10), alpha, karma::Rat(900'000));
    };
    karma::SimReport mm =
        karma::run(trace, karma::PolicyKind::maxmin_periodic, config_at(karma::rat(1, 2)), {});
    karma::SimReport k0 = karma::run(trace, karma::PolicyKind::karma, config_at(karma::Rat(0)), {});
    karma::SimReport kh =
        karma::run(trace, karma::PolicyKind::karma, config_at(karma::rat(1, 2)), {});
    karma::SimReport k1 = karma::run(trace, karma::PolicyKind::karma, config_at(karma::Rat(1)), {});

    double du = std::abs(karma::to_double(kh.metrics.utilization) -
                         karma::to_double(mm.metrics.utilization));
    expect(du <= 1e-9, "utilization gap " + std::to_string(du));
    expect(kh.metrics.fairness > mm.metrics.fairness, "fairness does not exceed max-min");
    expect(k0.metrics.fairness >= kh.metrics.fairness, "fairness rises from alpha 0 to 1/2");
    expect(kh.metrics.fairness >= k1.metrics.fairness, "fairness rises from alpha 1/2 to 1");
    expect(seconds_since(t0) < 60.0, "runtime over 60 s");
}

// 10. Hand-off protocol: no stale access ever succeeds; a dirty slice flushes
//     immediately before its new owner's first write.
void criterion10() {
    std::mt19937_64 eng(1337);
    const i64 cap = 64;
    const i64 n_users = 8;
    karma::SlicePool pool(cap);

    struct Shadow {
        karma::UserId owner = karma::kNoOwner;
        std::uint64_t seq = 0;
        bool touched = false;
        karma::UserId dirty = karma::kNoOwner;
    };
    std::vector<Shadow> sh(cap);
    i64 stale_successes = 0;

    for (int round = 0; round < 1000; ++round) {
        std::map<karma::UserId, i64> alloc;
        i64 left = cap;
        for (karma::UserId u = 0; u < n_users; ++u) {
            i64 want = static_cast<i64>(eng() % static_cast<std::uint64_t>(
                                                    std::min<i64>(left, 16) + 1));
            alloc[u] = want;
            left -= want;
        }

        // Mirror of the reassignment contract: keep in place, release by
        // slice index, assign deficits in user order from the free list.
        std::map<karma::UserId, i64> keep = alloc;
        std::vector<i64> free_list;
        for (i64 s = 0; s < cap; ++s) {
            if (sh[s].owner == karma::kNoOwner) {
                free_list.push_back(s);
                continue;
            }
            auto it = keep.find(sh[s].owner);
            if (it != keep.end() && it->second > 0) {
                it->second -= 1;
            } else {
                if (sh[s].touched) sh[s].dirty = sh[s].owner;
                sh[s].owner = karma::kNoOwner;
                sh[s].touched = false;
                free_list.push_back(s);
            }
        }
        i64 expect_moved = 0;
        std::size_t next = 0;
        for (const auto& [u, want] : keep)
            for (i64 i = 0; i < want; ++i) {
                i64 s = free_list[next++];
                sh[s].owner = u;
                sh[s].seq += 1;
                sh[s].touched = false;
                ++expect_moved;
            }
        expect(pool.apply_allocation(alloc) == expect_moved,
               "move count at round " + std::to_string(round));

        // Stale probes: wrong actor, or right actor with an old seq.
        for (int probe = 0; probe < 8; ++probe) {
            i64 s = static_cast<i64>(eng() % cap);
            karma::UserId wrong =
                (sh[s].owner + 1 + static_cast<karma::UserId>(eng() % (n_users - 1))) % n_users;
            karma::AccessStatus st = (eng() % 2) ? pool.read(s, wrong, sh[s].seq)
                                                 : pool.write(s, wrong, sh[s].seq + 1);
            if (st != karma::AccessStatus::stale) ++stale_successes;
            if (sh[s].owner != karma::kNoOwner) {
                if (pool.read(s, sh[s].owner, sh[s].seq - 1) != karma::AccessStatus::stale)
                    ++stale_successes;
            }
        }

        // First write per owned slice; dirty slices must flush first.
        for (i64 s = 0; s < cap; ++s) {
            if (sh[s].owner == karma::kNoOwner) continue;
            bool want_flush = !sh[s].touched && sh[s].dirty != karma::kNoOwner &&
                              sh[s].dirty != sh[s].owner;
            std::size_t log_before = pool.events().size();
            karma::AccessStatus st = pool.write(s, sh[s].owner, sh[s].seq);
            const auto& log = pool.events();
            if (want_flush) {
                expect(st == karma::AccessStatus::flush_then_ok,
                       "missing flush at round " + std::to_string(round));
                expect(log.size() == log_before + 2, "flush event count");
                expect(log[log_before].kind == "flush" && log[log_before].slice == s &&
                           log[log_before].actor == sh[s].dirty,
                       "flush event shape");
                expect(log.back().kind == "write" && log.back().slice == s,
                       "write directly after flush");
            } else {
                expect(st == karma::AccessStatus::ok,
                       "unexpected flush at round " + std::to_string(round));
                expect(log.size() == log_before + 1 && log.back().kind == "write",
                       "write event shape");
            }
            if (!sh[s].touched) sh[s].dirty = karma::kNoOwner;
            sh[s].touched = true;
        }
        expect(pool.check_invariant(), "ownership invariant");
    }
    expect(stale_successes == 0,
           std::to_string(stale_successes) + " stale accesses succeeded");
}

struct Criterion {
    int id;
    const char* name;
    std::function<void()> fn;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "fig4 credit trajectory and timing", criterion1},
        {2, "periodic and static max-min baselines", criterion2},
        {3, "worst-case max-min disparity n+1", criterion3},
        {4, "strategic gain and loss instances", criterion4},
        {5, "table1 and table2 instances at n=8", criterion5},
        {6, "deviation bounds on random instances", criterion6},
        {7, "maximin optimality against the oracle", criterion7},
        {8, "batched allocator differential, 10000 instances", criterion8},
        {9, "synthetic workload utilization and fairness", criterion9},
        {10, "slice hand-off protocol", criterion10},
    };
    bool all_pass = true;
    for (const Criterion& c : criteria) {
        try {
            c.fn();
            std::cout << "PASS criterion " << c.id << ": " << c.name << "\n";
        } catch (const std::exception& e) {
            std::cout << "FAIL criterion " << c.id << ": " << c.name << " (" << e.what() << ")\n";
            all_pass = false;
        }
    }
    return all_pass ? 0 : 1;
}
