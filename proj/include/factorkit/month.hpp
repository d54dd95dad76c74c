#pragma once

#include <compare>
#include <cstdio>
#include <string>

namespace factorkit {

// Calendar month key. Arithmetic is closed: months live on the integer line
// year*12 + (month-1).
struct MonthKey {
    int year = 0;
    int month = 1;  // 1..12

    static MonthKey from_serial(int s) {
        int y = s / 12;
        int m = s % 12;
        if (m < 0) {
            m += 12;
            --y;
        }
        return MonthKey{y, m + 1};
    }

    int serial() const { return year * 12 + (month - 1); }

    MonthKey plus_months(int k) const { return from_serial(serial() + k); }

    // Signed distance in months: *this - other.
    int months_since(const MonthKey& other) const { return serial() - other.serial(); }

    auto operator<=>(const MonthKey& other) const { return serial() <=> other.serial(); }
    bool operator==(const MonthKey& other) const { return serial() == other.serial(); }

    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
        return buf;
    }
};

inline bool valid_month_number(int m) { return m >= 1 && m <= 12; }

}  // namespace factorkit
