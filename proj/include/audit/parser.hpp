#pragma once

#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "audit/money.hpp"

// Response coding: pull every "$"-prefixed amount out of a reply, resolve
// multi-value replies to their mean, and code replies without any dollar
// value as refusals.

namespace audit {

struct ParsedResponse {
  std::string query_id;
  std::vector<Money> dollar_values;          // textual order, duplicates kept
  std::optional<double> resolved_offer;      // dollars; absent iff refusal
  bool refusal = false;
  std::uint64_t response_length_bytes = 0;
  bool verbose = false;                      // length > 100 bytes
  bool needs_review = false;                 // "$100k"-style amount seen but unmatched
};

namespace detail {

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

// True when the text following a numeric match turns it into a magnitude
// shorthand ("$100k", "$1.2 million") that v1 deliberately does not parse.
inline bool magnitude_suffix_follows(std::string_view s, std::size_t pos) {
  if (pos < s.size()) {
    char c = s[pos];
    if (c == 'k' || c == 'K' || c == 'm' || c == 'M' || c == 'b' || c == 'B') {
      // "$100m" but not "$100 months"... single letters only count when not
      // starting a longer word, except the spelled-out magnitudes below.
      std::size_t end = pos;
      while (end < s.size() && std::isalpha(static_cast<unsigned char>(s[end]))) ++end;
      std::string_view word = s.substr(pos, end - pos);
      if (word.size() == 1) return true;
      if (word == "mm" || word == "MM") return true;
    }
  }
  std::size_t p = pos;
  if (p < s.size() && s[p] == ' ') ++p;
  std::size_t end = p;
  while (end < s.size() && std::isalpha(static_cast<unsigned char>(s[end]))) ++end;
  std::string_view word = s.substr(p, end - p);
  return word == "million" || word == "Million" || word == "billion" ||
         word == "Billion" || word == "thousand" || word == "Thousand" ||
         word == "k" || word == "K";
}

}  // namespace detail

struct DollarScan {
  std::vector<Money> values;
  bool saw_magnitude_shorthand = false;
};

// Scans arbitrary UTF-8 for $-prefixed amounts: digit groups with optional
// comma thousands separators and optional cents. Cents beyond two digits are
// truncated. Bare numbers without "$" never match.
inline DollarScan scan_dollar_values(std::string_view raw) {
  DollarScan out;
  std::size_t i = 0;
  while (i < raw.size()) {
    if (raw[i] != '$' || i + 1 >= raw.size() || !detail::is_digit(raw[i + 1])) {
      ++i;
      continue;
    }
    std::size_t p = i + 1;
    std::int64_t whole = 0;
    while (p < raw.size() && detail::is_digit(raw[p])) {
      whole = whole * 10 + (raw[p] - '0');
      ++p;
    }
    // comma groups: ",ddd" not followed by a fourth digit
    while (p + 3 < raw.size() && raw[p] == ',' && detail::is_digit(raw[p + 1]) &&
           detail::is_digit(raw[p + 2]) && detail::is_digit(raw[p + 3]) &&
           (p + 4 >= raw.size() || !detail::is_digit(raw[p + 4]))) {
      whole = whole * 1000 + (raw[p + 1] - '0') * 100 + (raw[p + 2] - '0') * 10 +
              (raw[p + 3] - '0');
      p += 4;
    }
    std::int64_t cents = 0;
    if (p + 1 < raw.size() && raw[p] == '.' && detail::is_digit(raw[p + 1])) {
      std::size_t d = p + 1;
      std::string frac;
      while (d < raw.size() && detail::is_digit(raw[d])) {
        frac.push_back(raw[d]);
        ++d;
      }
      cents = (frac[0] - '0') * 10;
      if (frac.size() > 1) cents += frac[1] - '0';  // extra digits truncated
      p = d;
    }
    if (detail::magnitude_suffix_follows(raw, p)) {
      out.saw_magnitude_shorthand = true;
      i = p;
      continue;
    }
    out.values.push_back(Money{whole * 100 + cents});
    i = p;
  }
  return out;
}

inline std::vector<Money> extract_dollar_values(std::string_view raw) {
  return scan_dollar_values(raw).values;
}

// Mean of the extracted amounts, exact whenever the cent total divides evenly.
inline std::optional<double> resolve_offer(const std::vector<Money>& values) {
  if (values.empty()) return std::nullopt;
  std::int64_t sum_cents = 0;
  for (const auto& v : values) sum_cents += v.cents;
  auto n = static_cast<std::int64_t>(values.size());
  if (sum_cents % n == 0)
    return static_cast<double>(sum_cents / n) / 100.0;
  return static_cast<double>(sum_cents) / (100.0 * static_cast<double>(n));
}

inline ParsedResponse parse_response(std::string_view raw, std::string query_id = {}) {
  ParsedResponse p;
  p.query_id = std::move(query_id);
  DollarScan scan = scan_dollar_values(raw);
  p.dollar_values = std::move(scan.values);
  p.resolved_offer = resolve_offer(p.dollar_values);
  p.refusal = p.dollar_values.empty();
  p.response_length_bytes = raw.size();
  p.verbose = p.response_length_bytes > 100;
  p.needs_review = p.refusal && scan.saw_magnitude_shorthand;
  return p;
}

// One row of the refusal/length summary, per (model, voice) stratum.
struct RefusalRow {
  std::string model_id;
  std::string voice;
  std::uint64_t n_total = 0;
  std::uint64_t n_refused = 0;
  double pct_refused = 0.0;
  double mean_length_bytes = 0.0;
  std::uint64_t n_over_100_bytes = 0;
  double pct_over_100_bytes = 0.0;
};

}  // namespace audit
