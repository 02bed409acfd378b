#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "karma/config.hpp"
#include "karma/rational.hpp"

namespace karma {

struct DemandTrace {
    std::vector<std::string> users;                  // roster; index is the user id everywhere
    std::vector<std::vector<std::int64_t>> demand;   // [quantum][user], slices

    std::int64_t quanta() const { return static_cast<std::int64_t>(demand.size()); }
    std::int64_t n_users() const { return static_cast<std::int64_t>(users.size()); }

    bool operator==(const DemandTrace&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline bool valid_user_name(const std::string& name) {
    if (name.empty()) return false;
    for (char c : name) {
        bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                  c == '_' || c == '.' || c == '-';
        if (!ok) return false;
    }
    return true;
}

inline std::int64_t parse_i64(const std::string& s, const std::string& what, std::size_t line_no) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw input_error("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
    }
}

}  // namespace detail

// CSV with header `quantum,user,demand`. Quanta are 0-based; absent
// (quantum,user) cells mean demand 0; duplicate cells are an error. The
// roster is the order of first appearance. When slice_bytes > 0, the demand
// column is in bytes and is quantized up to whole slices.
inline DemandTrace load_trace(std::istream& in, std::int64_t slice_bytes = 0) {
    std::string line;
    if (!std::getline(in, line)) throw input_error("empty trace: missing header");
    if (detail::trim(line) != "quantum,user,demand")
        throw input_error("bad trace header '" + detail::trim(line) + "' (want quantum,user,demand)");

    std::map<std::string, std::int64_t> index;
    std::vector<std::string> users;
    // (quantum, user) -> demand
    std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> cells;
    std::int64_t max_q = -1;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::string row = detail::trim(line);
        if (row.empty()) continue;
        std::istringstream ss(row);
        std::string qs, us, ds, extra;
        if (!std::getline(ss, qs, ',') || !std::getline(ss, us, ',') || !std::getline(ss, ds, ','))
            throw input_error("line " + std::to_string(line_no) + ": expected quantum,user,demand");
        if (std::getline(ss, extra, ','))
            throw input_error("line " + std::to_string(line_no) + ": trailing fields");
        std::int64_t q = detail::parse_i64(detail::trim(qs), "quantum", line_no);
        if (q < 0) throw input_error("line " + std::to_string(line_no) + ": negative quantum");
        std::string user = detail::trim(us);
        if (!detail::valid_user_name(user))
            throw input_error("line " + std::to_string(line_no) + ": bad user id '" + user + "'");
        std::int64_t d = detail::parse_i64(detail::trim(ds), "demand", line_no);
        if (d < 0) throw input_error("line " + std::to_string(line_no) + ": negative demand");
        if (slice_bytes > 0) d = (d + slice_bytes - 1) / slice_bytes;

        auto [it, fresh] = index.try_emplace(user, static_cast<std::int64_t>(users.size()));
        if (fresh) users.push_back(user);
        auto key = std::make_pair(q, it->second);
        if (!cells.emplace(key, d).second)
            throw input_error("line " + std::to_string(line_no) + ": duplicate cell for quantum " +
                              std::to_string(q) + ", user " + user);
        max_q = std::max(max_q, q);
    }
    if (max_q < 0) throw input_error("empty trace: no demand rows");

    DemandTrace trace;
    trace.users = users;
    trace.demand.assign(max_q + 1, std::vector<std::int64_t>(users.size(), 0));
    for (const auto& [key, d] : cells) trace.demand[key.first][key.second] = d;
    return trace;
}

// Writes every cell, zeros included, so the roster and quantum count survive
// a round trip.
inline void save_trace(const DemandTrace& trace, std::ostream& out) {
    out << "quantum,user,demand\n";
    for (std::int64_t q = 0; q < trace.quanta(); ++q)
        for (std::int64_t u = 0; u < trace.n_users(); ++u)
            out << q << ',' << trace.users[u] << ',' << trace.demand[q][u] << '\n';
}

struct Example {
    DemandTrace trace;
    Config config;
};

// Named instances used throughout the tests. The fig* instances are 3 or 4
// fixed users; the parameterized ones take n.
inline Example gen_example(const std::string& name, std::int64_t n = 0) {
    auto fixed_n = [&](std::int64_t want) {
        if (n != 0 && n != want)
            throw input_error("example '" + name + "' has fixed n=" + std::to_string(want));
    };
    Example ex;
    if (name == "fig3" || name == "fig4") {
        fixed_n(3);
        ex.trace.users = {"A", "B", "C"};
        ex.trace.demand = {{3, 2, 1}, {3, 0, 0}, {0, 3, 0}, {2, 2, 4}, {2, 3, 5}};
        ex.config = make_uniform_config(3, Rat(2), rat(1, 2), Rat(6));
        return ex;
    }
    if (name == "fig6-gain" || name == "fig6-loss") {
        fixed_n(4);
        ex.trace.users = {"A", "B", "C", "D"};
        if (name == "fig6-gain")
            ex.trace.demand = {{8, 8, 0, 0}, {8, 0, 8, 0}, {8, 8, 0, 0}};
        else
            ex.trace.demand = {{8, 0, 0, 0}, {8, 2, 2, 2}, {8, 2, 2, 2}};
        ex.config = make_uniform_config(4, Rat(2), Rat(0), Rat(1000));
        return ex;
    }
    if (name == "maxmin-worstcase") {
        if (n < 2) throw input_error("maxmin-worstcase needs n >= 2");
        for (std::int64_t u = 0; u + 1 < n; ++u) ex.trace.users.push_back("B" + std::to_string(u + 1));
        ex.trace.users.push_back("A");
        ex.trace.demand.assign(n + 1, std::vector<std::int64_t>(n, 0));
        for (std::int64_t q = 0; q <= n; ++q)
            for (std::int64_t u = 0; u + 1 < n; ++u) ex.trace.demand[q][u] = 1;
        ex.trace.demand[n][n - 1] = n;
        ex.config = make_uniform_config(n, Rat(1), Rat(0), Rat(10 * n * (n + 1)));
        return ex;
    }
    if (name == "table1") {
        if (n < 8 || n % 8 != 0)
            throw input_error("table1 needs n divisible by 8 (allocations are n/2, n/4, 3n/8)");
        ex.trace.users = {"A", "B", "C"};
        for (std::int64_t u = 3; u < n; ++u) ex.trace.users.push_back("u" + std::to_string(u));
        ex.trace.demand.assign(3, std::vector<std::int64_t>(n, 0));
        ex.trace.demand[0][0] = n;
        ex.trace.demand[1][0] = n;
        ex.trace.demand[2][0] = n;
        ex.trace.demand[0][1] = n;
        ex.trace.demand[2][1] = n;
        ex.trace.demand[1][2] = n;
        ex.config = make_uniform_config(n, Rat(1), Rat(0), Rat(100 * n));
        return ex;
    }
    if (name == "table2") {
        if (n < 3) throw input_error("table2 needs n >= 3");
        ex.trace.users = {"A"};
        for (std::int64_t u = 1; u < n; ++u) ex.trace.users.push_back("u" + std::to_string(u));
        ex.trace.demand.assign(3, std::vector<std::int64_t>(n, 0));
        ex.trace.demand[0][0] = n;
        ex.trace.demand[1][0] = n;
        ex.trace.demand[2][0] = n;
        for (std::int64_t u = 1; u < n; ++u) {
            ex.trace.demand[1][u] = 1;
            ex.trace.demand[2][u] = 1;
        }
        ex.config = make_uniform_config(n, Rat(1), Rat(0), Rat(100 * n));
        return ex;
    }
    throw input_error("unknown example '" + name + "'");
}

struct BurstParams {
    std::int64_t fair_share = 10;      // long-run mean demand per user, slices
    std::int64_t burst_amplitude = 8;  // uniform jitter width (center +- amplitude/2); 0 = constant
    std::int64_t burst_period = 8;     // quanta between spikes for bursty users
    std::int64_t bursty_percent = 50;  // share of users with the bursty profile
};

// Two user populations with the same long-run mean demand (the fair share),
// differing only in shape. Steady users jitter around f every quantum; bursty
// users idle at one slice and concentrate the rest of a period's budget into
// one spike on a fixed per-user cadence. Random phases make spike collisions
// vary quantum to quantum while per-user totals stay matched, which is what
// lets credit banking beat memoryless allocation on fairness.
// Integer arithmetic off a seeded mt19937_64 only, so a seed pins the matrix.
inline DemandTrace gen_synthetic(std::int64_t n, std::int64_t T, const BurstParams& p,
                                 std::uint64_t seed) {
    if (n <= 0 || T <= 0) throw input_error("gen_synthetic: n and T must be positive");
    if (p.fair_share <= 0 || p.burst_period <= 0 || p.burst_amplitude < 0 ||
        p.bursty_percent < 0 || p.bursty_percent > 100)
        throw input_error("gen_synthetic: bad burst params");

    std::mt19937_64 eng(seed);
    auto roll = [&](std::int64_t m) { return static_cast<std::int64_t>(eng() % static_cast<std::uint64_t>(m)); };
    auto jitter = [&](std::int64_t center) {
        return std::max<std::int64_t>(
            0, center - p.burst_amplitude / 2 + roll(p.burst_amplitude + 1));
    };

    DemandTrace trace;
    trace.demand.assign(T, std::vector<std::int64_t>(n, 0));
    std::int64_t bursty_count = n * p.bursty_percent / 100;
    const std::int64_t f = p.fair_share;
    for (std::int64_t u = 0; u < n; ++u) {
        trace.users.push_back("u" + std::to_string(u));
        bool bursty = u < bursty_count;
        std::int64_t phase = roll(p.burst_period);
        for (std::int64_t t = 0; t < T; ++t) {
            std::int64_t d;
            if (p.burst_amplitude == 0) {
                d = f;
            } else if (!bursty) {
                d = jitter(f);
            } else if ((t + phase) % p.burst_period == 0) {
                d = std::max<std::int64_t>(1, jitter(f * p.burst_period - (p.burst_period - 1)));
            } else {
                d = 1;
            }
            trace.demand[t][u] = d;
        }
    }
    return trace;
}

// Flat key-value config text: `key = value`, one per line, '#' comments.
// Keys: alpha, fair_share (scalar or comma-separated user:share list),
// init_credits, capacity_mode (fixed|scale-on-churn), slice_mb.
inline Config parse_config_text(std::istream& in, const DemandTrace& trace) {
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::string row = detail::trim(line);
        if (row.empty()) continue;
        auto eq = row.find('=');
        if (eq == std::string::npos)
            throw input_error("config line " + std::to_string(line_no) + ": expected key = value");
        std::string key = detail::trim(row.substr(0, eq));
        std::string value = detail::trim(row.substr(eq + 1));
        if (key.empty() || value.empty())
            throw input_error("config line " + std::to_string(line_no) + ": expected key = value");
        if (!kv.emplace(key, value).second)
            throw input_error("config line " + std::to_string(line_no) + ": duplicate key " + key);
    }

    Rat alpha = kv.count("alpha") ? rat_parse(kv.at("alpha")) : rat(1, 2);
    Rat init = kv.count("init_credits") ? rat_parse(kv.at("init_credits")) : Rat(0);

    Config cfg;
    std::string share_text = kv.count("fair_share") ? kv.at("fair_share") : "1";
    if (share_text.find(':') == std::string::npos) {
        cfg = make_uniform_config(trace.n_users(), rat_parse(share_text), alpha, init);
    } else {
        std::map<UserId, Rat> shares;
        std::istringstream ss(share_text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            auto colon = item.find(':');
            if (colon == std::string::npos)
                throw input_error("config: bad fair_share entry '" + item + "'");
            std::string user = detail::trim(item.substr(0, colon));
            auto it = std::find(trace.users.begin(), trace.users.end(), user);
            if (it == trace.users.end())
                throw input_error("config: fair_share for unknown user '" + user + "'");
            UserId uid = it - trace.users.begin();
            if (!shares.emplace(uid, rat_parse(detail::trim(item.substr(colon + 1)))).second)
                throw input_error("config: duplicate fair_share for user '" + user + "'");
        }
        if (static_cast<std::int64_t>(shares.size()) != trace.n_users())
            throw input_error("config: per-user fair_share must cover every user in the trace");
        cfg = make_weighted_config(shares, alpha, init);
    }
    if (kv.count("capacity_mode")) {
        const std::string& mode = kv.at("capacity_mode");
        if (mode == "fixed")
            cfg.churn = ChurnMode::fixed_capacity;
        else if (mode == "scale-on-churn")
            cfg.churn = ChurnMode::scale_capacity;
        else
            throw input_error("config: capacity_mode must be fixed or scale-on-churn");
    }
    if (kv.count("slice_mb")) {
        cfg.slice_mb = detail::parse_i64(kv.at("slice_mb"), "slice_mb", 0);
        if (cfg.slice_mb <= 0) throw input_error("config: slice_mb must be positive");
    }
    for (const auto& [key, value] : kv) {
        if (key != "alpha" && key != "fair_share" && key != "init_credits" &&
            key != "capacity_mode" && key != "slice_mb")
            throw input_error("config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

}  // namespace karma
