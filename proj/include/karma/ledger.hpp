#pragma once

#include <cstdint>
#include <map>

#include "karma/config.hpp"
#include "karma/rational.hpp"

namespace karma {

struct Ledger {
    std::map<UserId, Rat> credits;
    std::map<UserId, Rat> rate;  // credit delta of the current quantum, nonzero entries only
    std::map<UserId, std::int64_t> cumulative_alloc;
    std::int64_t quantum_index = 0;

    std::int64_t n_users() const { return static_cast<std::int64_t>(credits.size()); }
    bool registered(UserId u) const { return credits.count(u) != 0; }

    bool operator==(const Ledger&) const = default;
};

// Users are 0..n-1 in uniform mode, the share-map keys in weighted mode.
inline Ledger new_ledger(const Config& cfg) {
    cfg.validate();
    Ledger led;
    if (cfg.weighted()) {
        for (const auto& [u, f] : cfg.per_user_share) {
            led.credits[u] = cfg.init_credits;
            led.cumulative_alloc[u] = 0;
        }
    } else {
        for (std::int64_t u = 0; u < cfg.n_users; ++u) {
            led.credits[u] = cfg.init_credits;
            led.cumulative_alloc[u] = 0;
        }
    }
    return led;
}

// A joining user starts with the arithmetic mean of the existing balances, so
// churn neither mints nor destroys relative standing.
inline void join_user(Ledger& led, Config& cfg, UserId new_user) {
    if (led.registered(new_user))
        throw input_error("join: user " + std::to_string(new_user) + " already registered");
    if (led.n_users() == 0) throw input_error("join: empty ledger");
    Rat sum = 0;
    for (const auto& [u, c] : led.credits) sum += c;
    Rat mean = sum / Rat(led.n_users());

    std::int64_t n_new = cfg.n_users + 1;
    if (cfg.churn == ChurnMode::fixed_capacity) {
        // Pool constant; every share (incl. the newcomer's) scales to fit.
        if (cfg.weighted()) {
            Rat factor = Rat(n_new - 1) / Rat(n_new);
            for (auto& [u, f] : cfg.per_user_share) f *= factor;
            cfg.per_user_share[new_user] = Rat(cfg.capacity) / Rat(n_new);
        } else {
            cfg.uniform_share = Rat(cfg.capacity) / Rat(n_new);
        }
    } else {
        // Pool grows by the newcomer's share.
        Rat f_new = cfg.weighted() ? Rat(cfg.capacity) / Rat(cfg.n_users) : cfg.uniform_share;
        Rat cap = Rat(cfg.capacity) + f_new;
        if (!is_integer(cap))
            throw input_error("join: grown capacity " + rat_to_string(cap) +
                              " is not a whole slice count");
        cfg.capacity = floor_i64(cap);
        if (cfg.weighted()) cfg.per_user_share[new_user] = f_new;
    }
    cfg.n_users = n_new;
    cfg.validate();

    led.credits[new_user] = mean;
    led.cumulative_alloc[new_user] = 0;
}

// A leaving user takes its credits with it; nobody else's balance moves.
inline void leave_user(Ledger& led, Config& cfg, UserId user) {
    if (!led.registered(user)) throw input_error("leave: unknown user " + std::to_string(user));
    if (led.n_users() == 1) throw input_error("leave: cannot remove the last user");

    Rat f_leaver = cfg.fair_share(user);
    std::int64_t n_new = cfg.n_users - 1;
    if (cfg.churn == ChurnMode::fixed_capacity) {
        // Pool constant; remaining shares absorb the leaver's proportionally.
        Rat remaining = Rat(cfg.capacity) - f_leaver;
        if (remaining <= 0) throw input_error("leave: no capacity left for remaining users");
        Rat factor = Rat(cfg.capacity) / remaining;
        if (cfg.weighted()) {
            cfg.per_user_share.erase(user);
            for (auto& [u, f] : cfg.per_user_share) f *= factor;
        } else {
            cfg.uniform_share = Rat(cfg.capacity) / Rat(n_new);
        }
    } else {
        Rat cap = Rat(cfg.capacity) - f_leaver;
        if (!is_integer(cap) || cap < 0)
            throw input_error("leave: shrunk capacity " + rat_to_string(cap) +
                              " is not a whole slice count");
        cfg.capacity = floor_i64(cap);
        if (cfg.weighted()) cfg.per_user_share.erase(user);
    }
    cfg.n_users = n_new;
    cfg.validate();

    led.credits.erase(user);
    led.cumulative_alloc.erase(user);
    led.rate.erase(user);
}

}  // namespace karma
