#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace karma {

// Exact arithmetic everywhere credits are involved: weighted mode charges
// 1/(n*w) per slice, and allocation order depends on exact comparisons.
using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

class input_error : public std::runtime_error {
public:
    explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

class budget_error : public std::runtime_error {
public:
    explicit budget_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline Rat rat(std::int64_t n) { return Rat(n); }

inline Rat rat(std::int64_t n, std::int64_t d) {
    if (d == 0) throw input_error("rational with zero denominator");
    return Rat(Int(n), Int(d));
}

// floor(n/d) with d > 0 (cpp_rational keeps denominators positive).
inline Int floor_int(const Rat& r) {
    Int n = numerator(r), d = denominator(r);
    if (n >= 0) return n / d;
    return -((-n + d - 1) / d);
}

inline Int ceil_int(const Rat& r) {
    Int n = numerator(r), d = denominator(r);
    if (n > 0) return (n + d - 1) / d;
    return -((-n) / d);
}

inline std::int64_t floor_i64(const Rat& r) { return floor_int(r).convert_to<std::int64_t>(); }
inline std::int64_t ceil_i64(const Rat& r) { return ceil_int(r).convert_to<std::int64_t>(); }

inline bool is_integer(const Rat& r) { return denominator(r) == 1; }

inline double to_double(const Rat& r) { return r.convert_to<double>(); }

// Canonical form: "n" when integral, "n/d" otherwise.
inline std::string rat_to_string(const Rat& r) {
    std::string s = numerator(r).str();
    if (denominator(r) != 1) s += "/" + denominator(r).str();
    return s;
}

// Accepts "3", "-3", "1/2", "0.25". No exponents.
inline Rat rat_parse(const std::string& text) {
    if (text.empty()) throw input_error("empty rational literal");
    try {
        auto slash = text.find('/');
        if (slash != std::string::npos) {
            Int n(text.substr(0, slash));
            Int d(text.substr(slash + 1));
            if (d == 0) throw input_error("rational with zero denominator: " + text);
            return Rat(n, d);
        }
        auto dot = text.find('.');
        if (dot == std::string::npos) return Rat(Int(text));
        std::string whole = text.substr(0, dot);
        std::string frac = text.substr(dot + 1);
        if (frac.find_first_not_of("0123456789") != std::string::npos)
            throw input_error("bad rational literal: " + text);
        bool neg = !whole.empty() && whole[0] == '-';
        if (whole == "-" || whole == "+" || whole.empty()) whole += "0";
        Int scale = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
        Int value = Int(whole) * scale;
        Int f = frac.empty() ? Int(0) : Int(frac);
        value += neg ? -f : f;
        return Rat(value, scale);
    } catch (const input_error&) {
        throw;
    } catch (const std::exception&) {
        throw input_error("bad rational literal: " + text);
    }
}

}  // namespace karma
