#pragma once

// Exact rationals (GMP) and the small amount of text handling the rest of the
// library needs: exact decimal parsing and a canonical num/den rendering.

#include <gmpxx.h>

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <string>
#include <string_view>

namespace algsolv {

using Rational = mpq_class;
using Integer = mpz_class;

/// Parses "p/q", "-12" or a finite decimal such as "1.1" or "-0.025" exactly.
inline Rational parse_rational(std::string_view text) {
  std::string s(text);
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
  if (s.empty()) throw std::invalid_argument("empty rational literal");

  Rational out;
  if (auto dot = s.find('.'); dot != std::string::npos) {
    if (s.find('/') != std::string::npos)
      throw std::invalid_argument("mixed decimal/fraction literal: " + s);
    bool negative = s[0] == '-';
    std::string body = (s[0] == '-' || s[0] == '+') ? s.substr(1) : s;
    dot = body.find('.');
    std::string digits = body.substr(0, dot) + body.substr(dot + 1);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); }))
      throw std::invalid_argument("malformed decimal literal: " + s);
    Integer num(digits, 10);
    Integer den;
    mpz_ui_pow_ui(den.get_mpz_t(), 10, body.size() - dot - 1);
    out = Rational(num, den);
    if (negative) out = -out;
  } else {
    if (s[0] == '+') s.erase(0, 1);
    if (out.set_str(s, 10) != 0) throw std::invalid_argument("malformed rational literal: " + s);
    if (out.get_den() == 0) throw std::invalid_argument("zero denominator: " + s);
  }
  out.canonicalize();
  return out;
}

/// Always "num/den" (den 1 included) so that every rendered value parses the same way.
inline std::string to_fraction_string(const Rational& q) {
  return q.get_num().get_str() + "/" + q.get_den().get_str();
}

}  // namespace algsolv
