#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace abusepipe {

// Monetary conventions used across the pipeline:
//   BTC   -> int64 satoshi (1e-8 BTC)
//   USD   -> int64 cents where an exact external value is stored
//   rates -> int64 "e4" fixed point (1e-4 USD per BTC)
// Deposit USD value accumulates as satoshi * rate_e4, i.e. USD * 1e12,
// held in __int128 so sums stay exact; rounding happens at presentation.

using usd_e12_t = __int128;

inline constexpr int64_t kSatoshiPerBtc = 100'000'000;

inline int64_t usd_to_cents(double usd) {
    if (!(usd >= 0)) throw std::invalid_argument("usd amount must be non-negative");
    return static_cast<int64_t>(std::llround(usd * 100.0));
}

inline int64_t rate_to_e4(double usd_per_btc) {
    if (!(usd_per_btc >= 0)) throw std::invalid_argument("usd rate must be non-negative");
    return static_cast<int64_t>(std::llround(usd_per_btc * 1e4));
}

inline usd_e12_t deposit_usd_e12(int64_t satoshi, int64_t rate_e4) {
    return static_cast<usd_e12_t>(satoshi) * static_cast<usd_e12_t>(rate_e4);
}

// Half-up division for non-negative values.
inline usd_e12_t div_round_half_up(usd_e12_t value, usd_e12_t divisor) {
    return (value + divisor / 2) / divisor;
}

inline int64_t usd_e12_to_cents(usd_e12_t v) {
    return static_cast<int64_t>(div_round_half_up(v, static_cast<usd_e12_t>(10'000'000'000LL)));
}

inline int64_t usd_e12_to_whole(usd_e12_t v) {
    return static_cast<int64_t>(div_round_half_up(v, static_cast<usd_e12_t>(1'000'000'000'000LL)));
}

inline int64_t cents_to_whole(int64_t cents) {
    return (cents + 50) / 100;
}

inline std::string format_thousands(int64_t value) {
    std::string digits = std::to_string(value < 0 ? -value : value);
    std::string out;
    int pos = 0;
    for (int i = static_cast<int>(digits.size()) - 1; i >= 0; --i, ++pos) {
        if (pos > 0 && pos % 3 == 0) out += ',';
        out += digits[static_cast<std::size_t>(i)];
    }
    if (value < 0) out += '-';
    std::reverse(out.begin(), out.end());
    return out;
}

// "10,601.76548108" — grouped integer BTC plus the full 8 satoshi decimals.
inline std::string format_btc(int64_t satoshi) {
    int64_t whole = satoshi / kSatoshiPerBtc;
    int64_t frac = satoshi % kSatoshiPerBtc;
    if (frac < 0) frac = -frac;
    std::string frac_str = std::to_string(frac);
    frac_str.insert(frac_str.begin(), 8 - frac_str.size(), '0');
    return format_thousands(whole) + "." + frac_str;
}

// "$251,082,116" — whole dollars with separators.
inline std::string format_usd_whole(int64_t dollars) {
    return "$" + format_thousands(dollars);
}

inline std::string format_usd_cents(int64_t cents) {
    int64_t whole = cents / 100;
    int64_t frac = cents % 100;
    if (frac < 0) frac = -frac;
    std::string f = std::to_string(frac);
    if (f.size() < 2) f.insert(f.begin(), '0');
    return std::to_string(whole) + "." + f;
}

}  // namespace abusepipe
