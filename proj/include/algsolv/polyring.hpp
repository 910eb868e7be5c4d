#pragma once

// Sparse multivariate polynomials with exact rational coefficients in the
// variables (E, S, X1, X2, X3), where along the trajectory
//
//   E = 1/(T - t),   S = eps * a(t),   a(t) = exp(-nu / (T - t)^5).
//
// Time derivation therefore acts on the ring through
//   dE/dt = E^2,   dS/dt = -5 nu S E^6
// and space derivation is the ordinary partial derivative in X1, X2, X3.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "algsolv/rational.hpp"

namespace algsolv {

enum class Var : int { E = 0, S = 1, X1 = 2, X2 = 3, X3 = 4 };
inline constexpr int kNumVars = 5;
inline constexpr unsigned kDefaultDegreeCap = 64;

struct DegreeCapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Monomial {
  std::array<std::uint16_t, kNumVars> exps{};

  unsigned degree() const {
    unsigned d = 0;
    for (auto e : exps) d += e;
    return d;
  }
  std::uint16_t operator[](Var v) const { return exps[static_cast<int>(v)]; }
  std::uint16_t& operator[](Var v) { return exps[static_cast<int>(v)]; }

  friend auto operator<=>(const Monomial&, const Monomial&) = default;
};

struct DerivationParams {
  Rational nu{1};
  unsigned degree_cap = kDefaultDegreeCap;
};

/// Point of evaluation (e, s, x1, x2, x3).
using Point = std::array<Rational, kNumVars>;

class Poly {
 public:
  struct Term {
    Monomial mono;
    Rational coeff;
    friend bool operator==(const Term& a, const Term& b) { return a.mono == b.mono && a.coeff == b.coeff; }
  };

  Poly() = default;
  Poly(long c) : Poly(Rational(c)) {}  // NOLINT: integer literals read naturally in formulas
  Poly(const Rational& c) {            // NOLINT
    if (c != 0) terms_.push_back({Monomial{}, c});
  }

  static Poly var(Var v, std::uint16_t power = 1) {
    Poly p;
    Monomial m;
    m[v] = power;
    p.terms_.push_back({m, Rational(1)});
    return p;
  }
  static Poly monomial(const Monomial& m, const Rational& c) {
    Poly p;
    if (c != 0) p.terms_.push_back({m, c});
    return p;
  }
  /// Builds a canonical polynomial from unsorted, possibly repeated terms.
  static Poly from_terms(std::vector<Term> terms) {
    Poly p;
    p.terms_ = std::move(terms);
    p.canonicalize();
    return p;
  }

  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  unsigned degree() const {
    unsigned d = 0;
    for (const auto& t : terms_) d = std::max(d, t.mono.degree());
    return d;
  }
  unsigned degree_in(Var v) const {
    unsigned d = 0;
    for (const auto& t : terms_) d = std::max<unsigned>(d, t.mono[v]);
    return d;
  }

  /// Coefficient of the constant monomial.
  Rational constant_term() const {
    if (!terms_.empty() && terms_.front().mono == Monomial{}) return terms_.front().coeff;
    return Rational(0);
  }

  friend bool operator==(const Poly& a, const Poly& b) { return a.terms_ == b.terms_; }

  friend Poly operator+(const Poly& a, const Poly& b) { return merge(a, b, false); }
  friend Poly operator-(const Poly& a, const Poly& b) { return merge(a, b, true); }
  Poly operator-() const {
    Poly p = *this;
    for (auto& t : p.terms_) t.coeff = -t.coeff;
    return p;
  }
  Poly& operator+=(const Poly& o) { return *this = *this + o; }
  Poly& operator-=(const Poly& o) { return *this = *this - o; }

  friend Poly operator*(const Poly& a, const Poly& b) { return mul(a, b, kDefaultDegreeCap); }
  Poly& operator*=(const Poly& o) { return *this = *this * o; }

  static Poly mul(const Poly& a, const Poly& b, unsigned degree_cap) {
    if (a.is_zero() || b.is_zero()) return {};
    std::vector<Term> out;
    out.reserve(a.size() * b.size());
    for (const auto& ta : a.terms_) {
      for (const auto& tb : b.terms_) {
        Monomial m;
        for (int i = 0; i < kNumVars; ++i) m.exps[i] = static_cast<std::uint16_t>(ta.mono.exps[i] + tb.mono.exps[i]);
        if (m.degree() > degree_cap)
          throw DegreeCapExceeded("polynomial degree " + std::to_string(m.degree()) + " exceeds cap " +
                                  std::to_string(degree_cap));
        out.push_back({m, ta.coeff * tb.coeff});
      }
    }
    return from_terms(std::move(out));
  }

  Poly scaled(const Rational& c) const {
    if (c == 0) return {};
    Poly p = *this;
    for (auto& t : p.terms_) t.coeff *= c;
    return p;
  }

 private:
  static Poly merge(const Poly& a, const Poly& b, bool subtract) {
    Poly out;
    out.terms_.reserve(a.size() + b.size());
    auto ia = a.terms_.begin(), ib = b.terms_.begin();
    while (ia != a.terms_.end() || ib != b.terms_.end()) {
      if (ib == b.terms_.end() || (ia != a.terms_.end() && ia->mono < ib->mono)) {
        out.terms_.push_back(*ia++);
      } else if (ia == a.terms_.end() || ib->mono < ia->mono) {
        out.terms_.push_back({ib->mono, subtract ? Rational(-ib->coeff) : ib->coeff});
        ++ib;
      } else {
        Rational c = subtract ? Rational(ia->coeff - ib->coeff) : Rational(ia->coeff + ib->coeff);
        if (c != 0) out.terms_.push_back({ia->mono, c});
        ++ia;
        ++ib;
      }
    }
    return out;
  }

  void canonicalize() {
    std::sort(terms_.begin(), terms_.end(), [](const Term& x, const Term& y) { return x.mono < y.mono; });
    std::vector<Term> out;
    out.reserve(terms_.size());
    for (auto& t : terms_) {
      if (!out.empty() && out.back().mono == t.mono)
        out.back().coeff += t.coeff;
      else
        out.push_back(std::move(t));
    }
    std::erase_if(out, [](const Term& t) { return t.coeff == 0; });
    terms_ = std::move(out);
  }

  std::vector<Term> terms_;
};

inline Poly scale(const Poly& p, const Rational& c) { return p.scaled(c); }

inline bool is_identically_zero(const Poly& p) { return p.is_zero(); }

/// Partial derivative along X1, X2 or X3 (axis 1..3); E and S are constant in space.
inline Poly derive_space(const Poly& p, int axis) {
  if (axis < 1 || axis > 3) throw std::invalid_argument("derive_space: axis must be 1, 2 or 3");
  const int slot = static_cast<int>(Var::X1) + axis - 1;
  std::vector<Poly::Term> out;
  out.reserve(p.size());
  for (const auto& t : p.terms()) {
    auto e = t.mono.exps[slot];
    if (e == 0) continue;
    Monomial m = t.mono;
    m.exps[slot] = static_cast<std::uint16_t>(e - 1);
    out.push_back({m, t.coeff * e});
  }
  return Poly::from_terms(std::move(out));
}

/// Total time derivative along the trajectory, extended to the ring by the Leibniz rule.
inline Poly derive_time(const Poly& p, const DerivationParams& params = {}) {
  std::vector<Poly::Term> out;
  out.reserve(2 * p.size());
  for (const auto& t : p.terms()) {
    const auto ei = t.mono[Var::E];
    const auto sj = t.mono[Var::S];
    if (ei > 0) {  // i E^(i-1) * E^2
      Monomial m = t.mono;
      m[Var::E] = static_cast<std::uint16_t>(ei + 1);
      out.push_back({m, t.coeff * ei});
    }
    if (sj > 0) {  // j S^(j-1) * (-5 nu S E^6)
      Monomial m = t.mono;
      m[Var::E] = static_cast<std::uint16_t>(ei + 6);
      out.push_back({m, t.coeff * sj * -5 * params.nu});
    }
  }
  for (const auto& t : out)
    if (t.mono.degree() > params.degree_cap)
      throw DegreeCapExceeded("time derivative reaches degree " + std::to_string(t.mono.degree()) + " (cap " +
                              std::to_string(params.degree_cap) + ")");
  return Poly::from_terms(std::move(out));
}

/// Exact evaluation; a ring homomorphism Q[E,S,X] -> Q.
inline Rational evaluate(const Poly& p, const Point& point) {
  std::array<std::vector<Rational>, kNumVars> powers;
  for (int v = 0; v < kNumVars; ++v) {
    unsigned top = p.degree_in(static_cast<Var>(v));
    powers[v].reserve(top + 1);
    powers[v].emplace_back(1);
    for (unsigned k = 1; k <= top; ++k) powers[v].push_back(powers[v].back() * point[v]);
  }
  Rational acc(0);
  for (const auto& t : p.terms()) {
    Rational term = t.coeff;
    for (int v = 0; v < kNumVars; ++v)
      if (t.mono.exps[v]) term *= powers[v][t.mono.exps[v]];
    acc += term;
  }
  return acc;
}

/// Replaces variable v by the polynomial q.
inline Poly substitute(const Poly& p, Var v, const Poly& q, unsigned degree_cap = kDefaultDegreeCap) {
  std::vector<Poly> q_powers{Poly(1)};
  Poly out;
  for (const auto& t : p.terms()) {
    const auto e = t.mono[v];
    while (q_powers.size() <= e) q_powers.push_back(Poly::mul(q_powers.back(), q, degree_cap));
    Monomial rest = t.mono;
    rest[v] = 0;
    out += Poly::mul(Poly::monomial(rest, t.coeff), q_powers[e], degree_cap);
  }
  return out;
}

// Text form: terms separated by " + ", each "num/den e^i s^j x1^k x2^l x3^m",
// in ascending monomial order. The zero polynomial is "0".

inline std::string to_string(const Poly& p) {
  if (p.is_zero()) return "0";
  static constexpr const char* names[kNumVars] = {"e", "s", "x1", "x2", "x3"};
  std::string out;
  bool first = true;
  for (const auto& t : p.terms()) {
    if (!first) out += " + ";
    first = false;
    out += to_fraction_string(t.coeff);
    for (int v = 0; v < kNumVars; ++v) {
      out += ' ';
      out += names[v];
      out += '^';
      out += std::to_string(t.mono.exps[v]);
    }
  }
  return out;
}

inline Poly parse_poly(const std::string& text) {
  std::istringstream in(text);
  std::string tok;
  std::vector<Poly::Term> terms;
  static constexpr const char* names[kNumVars] = {"e", "s", "x1", "x2", "x3"};
  while (in >> tok) {
    if (tok == "0" && terms.empty()) {
      std::string rest;
      if (!(in >> rest)) return {};
      throw std::invalid_argument("parse_poly: trailing text after 0");
    }
    if (tok == "+") continue;
    Poly::Term term;
    term.coeff = parse_rational(tok);
    for (int v = 0; v < kNumVars; ++v) {
      std::string f;
      if (!(in >> f)) throw std::invalid_argument("parse_poly: truncated term");
      const std::string prefix = std::string(names[v]) + "^";
      if (f.rfind(prefix, 0) != 0) throw std::invalid_argument("parse_poly: expected " + prefix + " got " + f);
      term.mono.exps[v] = static_cast<std::uint16_t>(std::stoul(f.substr(prefix.size())));
    }
    terms.push_back(std::move(term));
  }
  return Poly::from_terms(std::move(terms));
}

}  // namespace algsolv
