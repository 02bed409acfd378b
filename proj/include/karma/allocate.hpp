#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <queue>
#include <vector>

#include "karma/config.hpp"
#include "karma/ledger.hpp"
#include "karma/rational.hpp"

namespace karma {

// Demands for one quantum. Users not present demand 0; unknown keys are an error.
using QuantumDemands = std::map<UserId, std::int64_t>;

struct AllocationResult {
    std::map<UserId, std::int64_t> alloc;
    std::map<UserId, Rat> credit_delta;
    std::map<UserId, std::int64_t> donated_used;  // donor -> slices actually lent out
    std::map<UserId, std::int64_t> borrowed;      // borrower -> slices borrowed
    std::int64_t shared_used = 0;                 // borrowed slices sourced from the shared pool
    std::map<UserId, bool> satisfied;

    bool operator==(const AllocationResult&) const = default;
};

namespace detail {

inline void validate_demands(const Ledger& led, const QuantumDemands& demands) {
    for (const auto& [u, d] : demands) {
        if (!led.registered(u))
            throw input_error("demand for unregistered user " + std::to_string(u));
        if (d < 0)
            throw input_error("negative demand for user " + std::to_string(u));
    }
}

inline std::int64_t demand_of(const QuantumDemands& demands, UserId u) {
    auto it = demands.find(u);
    return it == demands.end() ? 0 : it->second;
}

// A borrower may take a slice while it still has credit for it: a full credit
// per slice in uniform mode, any positive balance in weighted mode (the
// fractional charge may overdraw slightly below zero).
inline bool can_borrow(const Config& cfg, const Rat& credits) {
    return cfg.weighted() ? credits > 0 : credits >= 1;
}

// Per-quantum state shared by both allocator routes.
struct Prep {
    std::vector<UserId> users;
    std::map<UserId, Rat> credits_before;  // before the free-credit mint
    std::map<UserId, std::int64_t> donated;
    std::int64_t shared = 0;
    std::int64_t donated_total = 0;
};

inline Prep prepare(Ledger& led, const Config& cfg, const QuantumDemands& demands,
                    AllocationResult& res) {
    cfg.validate();
    if (led.n_users() != cfg.n_users)
        throw input_error("ledger and config disagree on the user count");
    validate_demands(led, demands);

    Prep prep;
    Rat free = cfg.free_credit();
    std::int64_t guaranteed_sum = 0;
    for (auto& [u, credits] : led.credits) {
        prep.users.push_back(u);
        prep.credits_before[u] = credits;
        credits += free;
        std::int64_t g = cfg.guaranteed(u);
        std::int64_t d = demand_of(demands, u);
        guaranteed_sum += g;
        res.alloc[u] = std::min(d, g);
        std::int64_t don = std::max<std::int64_t>(0, g - d);
        prep.donated[u] = don;
        prep.donated_total += don;
        res.donated_used[u] = 0;
        res.borrowed[u] = 0;
    }
    prep.shared = cfg.capacity - guaranteed_sum;
    return prep;
}

inline void finalize(Ledger& led, const QuantumDemands& demands, const Prep& prep,
                     AllocationResult& res) {
    led.rate.clear();
    for (UserId u : prep.users) {
        Rat delta = led.credits.at(u) - prep.credits_before.at(u);
        res.credit_delta[u] = delta;
        if (delta != 0) led.rate[u] = delta;
        led.cumulative_alloc[u] += res.alloc.at(u);
        res.satisfied[u] = res.alloc.at(u) == demand_of(demands, u);
    }
    led.quantum_index += 1;
}

}  // namespace detail

// One quantum of credit-based allocation, slice by slice.
//
// Every user is minted (1-alpha)*capacity/n free credits, keeps at most its
// guaranteed share, and donates the unused remainder. Unmet demand is then
// served one slice at a time: the richest borrower takes the next slice,
// sourced from the poorest donor (who earns a credit) while donations last,
// from the shared pool afterwards. Ties pick the smallest user id; because
// every grant moves the chosen user's balance, tied users alternate.
inline AllocationResult allocate_quantum(Ledger& led, const Config& cfg,
                                         const QuantumDemands& demands) {
    AllocationResult res;
    detail::Prep prep = detail::prepare(led, cfg, demands, res);

    struct Entry {
        Rat credits;
        UserId id;
    };
    // Max-credit borrower first, min id on ties.
    auto borrower_after = [](const Entry& a, const Entry& b) {
        return a.credits != b.credits ? a.credits < b.credits : a.id > b.id;
    };
    // Min-credit donor first, min id on ties.
    auto donor_after = [](const Entry& a, const Entry& b) {
        return a.credits != b.credits ? a.credits > b.credits : a.id > b.id;
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(borrower_after)> borrowers(borrower_after);
    std::priority_queue<Entry, std::vector<Entry>, decltype(donor_after)> donors(donor_after);

    for (UserId u : prep.users) {
        if (prep.donated.at(u) > 0) donors.push({led.credits.at(u), u});
        std::int64_t d = detail::demand_of(demands, u);
        if (res.alloc.at(u) < d && detail::can_borrow(cfg, led.credits.at(u)))
            borrowers.push({led.credits.at(u), u});
    }

    std::int64_t donated_left = prep.donated_total;
    while (!borrowers.empty() && (donated_left > 0 || prep.shared > 0)) {
        Entry b = borrowers.top();
        borrowers.pop();
        if (donated_left > 0) {
            Entry d = donors.top();
            donors.pop();
            led.credits.at(d.id) += 1;
            prep.donated.at(d.id) -= 1;
            res.donated_used.at(d.id) += 1;
            donated_left -= 1;
            if (prep.donated.at(d.id) > 0) donors.push({led.credits.at(d.id), d.id});
        } else {
            prep.shared -= 1;
            res.shared_used += 1;
        }
        res.alloc.at(b.id) += 1;
        res.borrowed.at(b.id) += 1;
        led.credits.at(b.id) -= cfg.borrow_charge(b.id);
        if (res.alloc.at(b.id) < detail::demand_of(demands, b.id) &&
            detail::can_borrow(cfg, led.credits.at(b.id)))
            borrowers.push({led.credits.at(b.id), b.id});
    }

    detail::finalize(led, demands, prep, res);
    return res;
}

namespace detail {

// The sequential loop grants to the richest borrower, whose balance drops by a
// fixed charge per grant. Borrower u therefore receives grants at the credit
// values c_u, c_u - q_u, c_u - 2*q_u, ... : a descending ladder. The loop as a
// whole consumes rungs in (value desc, id asc) order, so the K grants that
// happen are exactly the K largest rungs. Donors mirror this with ascending
// ladders of step 1 (negate to reuse the same selection).
struct Ladder {
    Rat top;            // value of the first rung
    Rat step;           // > 0
    std::int64_t len;   // number of rungs
    UserId id;
};

// Rungs of L strictly above lambda.
inline std::int64_t rungs_above(const Ladder& L, const Rat& lambda) {
    if (L.top <= lambda) return 0;
    Int k = ceil_int((L.top - lambda) / L.step);
    return std::min(L.len, k.convert_to<std::int64_t>());
}

// Rungs of L at or above lambda.
inline std::int64_t rungs_at_or_above(const Ladder& L, const Rat& lambda) {
    if (L.top < lambda) return 0;
    Int k = floor_int((L.top - lambda) / L.step) + 1;
    return std::min(L.len, k.convert_to<std::int64_t>());
}

// Take the K largest rungs over all ladders, ordering by (value desc, id asc);
// a ladder's own rungs are strictly decreasing, so per-ladder order is free.
// Returns the number of rungs taken per ladder. K must not exceed the total.
inline std::map<UserId, std::int64_t> select_top_rungs(const std::vector<Ladder>& ladders,
                                                       std::int64_t K) {
    std::map<UserId, std::int64_t> taken;
    std::int64_t total = 0;
    for (const auto& L : ladders) {
        taken[L.id] = 0;
        total += L.len;
    }
    if (K <= 0) return taken;
    if (K >= total) {
        for (const auto& L : ladders) taken[L.id] = L.len;
        return taken;
    }

    // Narrow [lo, hi] around the K-th largest rung value, then enumerate the
    // survivors. The pivot halves the densest ladder's in-range rungs, and the
    // enumeration bound keeps the fallback exact regardless.
    Rat lo = ladders[0].top - ladders[0].step * Rat(ladders[0].len - 1);
    Rat hi = ladders[0].top;
    for (const auto& L : ladders) {
        lo = std::min(lo, L.top - L.step * Rat(L.len - 1));
        hi = std::max(hi, L.top);
    }
    const std::int64_t enumerate_cap =
        std::max<std::int64_t>(64, 4 * static_cast<std::int64_t>(ladders.size()));
    for (int iter = 0; iter < 64; ++iter) {
        std::int64_t in_range = 0;
        const Ladder* densest = nullptr;
        std::int64_t densest_count = 0;
        for (const auto& L : ladders) {
            std::int64_t c = rungs_at_or_above(L, lo) - rungs_above(L, hi);
            in_range += c;
            if (c > densest_count) {
                densest_count = c;
                densest = &L;
            }
        }
        if (in_range <= enumerate_cap || densest_count <= 1) break;
        std::int64_t first = rungs_above(*densest, hi);
        Rat pivot = densest->top - densest->step * Rat(first + densest_count / 2);
        std::int64_t at_or_above = 0;
        for (const auto& L : ladders) at_or_above += rungs_at_or_above(L, pivot);
        if (at_or_above >= K)
            lo = pivot;
        else
            hi = pivot;
    }

    std::int64_t above_hi = 0;
    for (const auto& L : ladders) above_hi += rungs_above(L, hi);
    struct Rung {
        Rat value;
        UserId id;
    };
    std::vector<Rung> pool;
    for (const auto& L : ladders) {
        std::int64_t first = rungs_above(L, hi);
        std::int64_t last = rungs_at_or_above(L, lo);
        taken[L.id] = first;
        for (std::int64_t k = first; k < last; ++k)
            pool.push_back({L.top - L.step * Rat(k), L.id});
    }
    std::sort(pool.begin(), pool.end(), [](const Rung& a, const Rung& b) {
        return a.value != b.value ? a.value > b.value : a.id < b.id;
    });
    std::int64_t remaining = K - above_hi;
    for (std::int64_t i = 0; i < remaining; ++i) taken[pool[i].id] += 1;
    return taken;
}

}  // namespace detail

// Same observable contract as allocate_quantum, computed without the
// per-slice loop: the borrower and donor sides are each resolved by one
// top-K rung selection.
inline AllocationResult allocate_quantum_batched(Ledger& led, const Config& cfg,
                                                 const QuantumDemands& demands) {
    AllocationResult res;
    detail::Prep prep = detail::prepare(led, cfg, demands, res);

    std::vector<detail::Ladder> borrow_ladders;
    std::int64_t want_total = 0;
    for (UserId u : prep.users) {
        std::int64_t want = detail::demand_of(demands, u) - res.alloc.at(u);
        if (want <= 0) continue;
        const Rat& c = led.credits.at(u);
        Rat q = cfg.borrow_charge(u);
        // Grants happen at balances c, c-q, ...; eligibility per can_borrow.
        std::int64_t by_credit;
        if (cfg.weighted()) {
            if (c <= 0) continue;
            Rat k = c / q;
            by_credit = is_integer(k) ? floor_i64(k) : ceil_i64(k);
        } else {
            if (c < 1) continue;
            by_credit = floor_i64(c);
        }
        std::int64_t len = std::min(want, by_credit);
        if (len <= 0) continue;
        borrow_ladders.push_back({c, q, len, u});
        want_total += len;
    }

    std::int64_t supply = prep.donated_total + prep.shared;
    std::int64_t grants = std::min(want_total, supply);
    auto granted = detail::select_top_rungs(borrow_ladders, grants);

    std::vector<detail::Ladder> donor_ladders;
    for (UserId u : prep.users) {
        std::int64_t don = prep.donated.at(u);
        if (don > 0) donor_ladders.push_back({-led.credits.at(u), Rat(1), don, u});
    }
    std::int64_t lent = std::min(grants, prep.donated_total);
    auto lends = detail::select_top_rungs(donor_ladders, lent);

    for (const auto& [u, x] : granted) {
        if (x == 0) continue;
        res.alloc.at(u) += x;
        res.borrowed.at(u) = x;
        led.credits.at(u) -= cfg.borrow_charge(u) * Rat(x);
    }
    for (const auto& [u, x] : lends) {
        if (x == 0) continue;
        res.donated_used.at(u) = x;
        led.credits.at(u) += Rat(x);
    }
    res.shared_used = grants - lent;

    detail::finalize(led, demands, prep, res);
    return res;
}

}  // namespace karma
