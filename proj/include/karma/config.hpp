#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "karma/rational.hpp"

namespace karma {

using UserId = std::int64_t;

// What happens to the slice pool when users join or leave.
//   fixed_capacity: pool size is constant, fair shares rescale proportionally.
//   scale_capacity: fair shares are constant, pool grows/shrinks by the
//                   joining/leaving user's share.
enum class ChurnMode { fixed_capacity, scale_capacity };

struct Config {
    Rat alpha;                              // guaranteed fraction of the fair share, in [0,1]
    Rat uniform_share;                      // fair share per user (uniform mode)
    std::map<UserId, Rat> per_user_share;   // non-empty switches on weighted mode
    Rat init_credits;
    std::int64_t capacity = 0;              // slices per quantum; equals the sum of fair shares
    ChurnMode churn = ChurnMode::fixed_capacity;
    std::int64_t slice_mb = 128;
    std::int64_t n_users = 0;

    bool weighted() const { return !per_user_share.empty(); }

    Rat fair_share(UserId u) const {
        if (!weighted()) return uniform_share;
        auto it = per_user_share.find(u);
        if (it == per_user_share.end())
            throw input_error("no fair share for user " + std::to_string(u));
        return it->second;
    }

    // Whole slices of guaranteed share; fractional remainders stay in the
    // shared pool.
    std::int64_t guaranteed(UserId u) const { return floor_i64(alpha * fair_share(u)); }

    // Credits burned per borrowed slice: 1 uniform, 1/(n*w_u) weighted where
    // w_u = f_u / capacity.
    Rat borrow_charge(UserId u) const {
        if (!weighted()) return Rat(1);
        Rat f = fair_share(u);
        if (f == 0) throw input_error("zero fair share cannot borrow (user " + std::to_string(u) + ")");
        return Rat(capacity) / (Rat(n_users) * f);
    }

    // Free credits minted per user per quantum: (1-alpha) * (sum of shares) / n.
    Rat free_credit() const { return (Rat(1) - alpha) * Rat(capacity) / Rat(n_users); }

    void validate() const {
        if (n_users <= 0) throw input_error("config: n_users must be positive");
        if (alpha < 0 || alpha > 1) throw input_error("config: alpha outside [0,1]");
        if (init_credits < 0) throw input_error("config: negative init_credits");
        if (capacity < 0) throw input_error("config: negative capacity");
        if (slice_mb <= 0) throw input_error("config: slice_mb must be positive");
        Rat total = 0;
        if (weighted()) {
            if (static_cast<std::int64_t>(per_user_share.size()) != n_users)
                throw input_error("config: per-user share count differs from n_users");
            for (const auto& [u, f] : per_user_share) {
                if (f < 0) throw input_error("config: negative fair share for user " + std::to_string(u));
                total += f;
            }
        } else {
            if (uniform_share < 0) throw input_error("config: negative fair share");
            total = uniform_share * Rat(n_users);
        }
        if (total != Rat(capacity))
            throw input_error("config: capacity " + std::to_string(capacity) +
                              " differs from sum of fair shares " + rat_to_string(total));
    }
};

inline Config make_uniform_config(std::int64_t n, const Rat& fair_share, const Rat& alpha,
                                  const Rat& init_credits) {
    Config cfg;
    cfg.alpha = alpha;
    cfg.uniform_share = fair_share;
    cfg.init_credits = init_credits;
    cfg.n_users = n;
    Rat cap = fair_share * Rat(n);
    if (!is_integer(cap))
        throw input_error("config: capacity " + rat_to_string(cap) + " is not a whole slice count");
    cfg.capacity = floor_i64(cap);
    cfg.validate();
    return cfg;
}

inline Config make_weighted_config(const std::map<UserId, Rat>& shares, const Rat& alpha,
                                   const Rat& init_credits) {
    Config cfg;
    cfg.alpha = alpha;
    cfg.per_user_share = shares;
    cfg.init_credits = init_credits;
    cfg.n_users = static_cast<std::int64_t>(shares.size());
    Rat cap = 0;
    for (const auto& [u, f] : shares) cap += f;
    if (!is_integer(cap))
        throw input_error("config: capacity " + rat_to_string(cap) + " is not a whole slice count");
    cfg.capacity = floor_i64(cap);
    cfg.validate();
    return cfg;
}

}  // namespace karma
