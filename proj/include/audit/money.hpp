#pragma once

#include <cstdint>
#include <cstdlib>
#include <string>

namespace audit {

// Dollar amounts are carried as integer cents so that parsing and averaging
// stay exact. Salary offers fit comfortably in int64.
struct Money {
  std::int64_t cents = 0;

  static Money from_dollars(std::int64_t dollars) { return Money{dollars * 100}; }
  double dollars() const { return static_cast<double>(cents) / 100.0; }
  bool whole_dollars() const { return cents % 100 == 0; }

  friend bool operator==(const Money&, const Money&) = default;
  friend auto operator<=>(const Money&, const Money&) = default;
};

// "$90,000" for whole amounts, "$90,000.50" otherwise.
inline std::string format_usd(Money m) {
  std::int64_t c = m.cents;
  std::string sign;
  if (c < 0) {
    sign = "-";
    c = -c;
  }
  std::int64_t whole = c / 100;
  std::int64_t frac = c % 100;

  std::string digits = std::to_string(whole);
  std::string grouped;
  int run = 0;
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    if (run == 3) {
      grouped.push_back(',');
      run = 0;
    }
    grouped.push_back(*it);
    ++run;
  }
  std::string out = sign + "$" + std::string(grouped.rbegin(), grouped.rend());
  if (frac != 0) {
    out.push_back('.');
    out.push_back(static_cast<char>('0' + frac / 10));
    out.push_back(static_cast<char>('0' + frac % 10));
  }
  return out;
}

}  // namespace audit
