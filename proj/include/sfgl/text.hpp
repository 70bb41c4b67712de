#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <system_error>

#include "sfgl/error.hpp"

namespace sfgl {

// Shortest decimal form that round-trips the exact double.
inline std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Fixed significant-digit form (checkpoint format pins 9).
inline std::string fmt_double(double v, int significant) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", significant, v);
  return buf;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

// Whitespace tokenizer over one line; returns false when exhausted.
class TokenScanner {
 public:
  explicit TokenScanner(std::string_view line) : rest_(line) {}

  bool next(std::string_view& tok) {
    std::size_t i = 0;
    while (i < rest_.size() && is_space(rest_[i])) ++i;
    if (i == rest_.size()) {
      rest_ = {};
      return false;
    }
    std::size_t j = i;
    while (j < rest_.size() && !is_space(rest_[j])) ++j;
    tok = rest_.substr(i, j - i);
    rest_.remove_prefix(j);
    return true;
  }

  bool exhausted() {
    std::string_view t;
    return !next(t);
  }

 private:
  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }
  std::string_view rest_;
};

inline bool parse_u64(std::string_view tok, std::uint64_t& out) {
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc{} && res.ptr == tok.data() + tok.size();
}

inline bool parse_i64(std::string_view tok, std::int64_t& out) {
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc{} && res.ptr == tok.data() + tok.size();
}

inline bool parse_double(std::string_view tok, double& out) {
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return res.ec == std::errc{} && res.ptr == tok.data() + tok.size();
}

}  // namespace sfgl
