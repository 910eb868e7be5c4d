#pragma once

// Compact coefficients for the large prolongation.
//
// Every coefficient of the eliminated system is affine in S: c0(X) + S*c1(X).
// Differentiating in t only ever hits S, so after any number of derivations
// a coefficient has the shape
//
//     c0(X) + sum_k  (d/dt)^k S * c_{k+1}(X)
//
// JetCoeff stores exactly that: terms keyed by (order, x1, x2, x3) where
// order 0 means "no S factor" and order k+1 means the jet (d/dt)^k S. The map
// back to Q[E,S,X] substitutes (d/dt)^k S = derive_time^k(S), which is a
// ring homomorphism on this subspace. The jets derive_time^k(S) = S*Q_k(E)
// have pairwise distinct top E-degrees (6k), so a JetCoeff is identically zero
// as an element of Q[E,S,X] iff all of its terms vanish.

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

#include "algsolv/polyring.hpp"

namespace algsolv {

class JetCoeff {
 public:
  using Key = std::uint32_t;  // order << 24 | x1 << 16 | x2 << 8 | x3
  using Term = std::pair<Key, std::int64_t>;

  static constexpr Key make_key(unsigned order, unsigned x1, unsigned x2, unsigned x3) {
    return (order << 24) | (x1 << 16) | (x2 << 8) | x3;
  }
  static constexpr unsigned order_of(Key k) { return k >> 24; }
  static constexpr unsigned exp_of(Key k, int axis) { return (k >> (8 * (3 - axis))) & 0xFF; }

  JetCoeff() = default;
  static JetCoeff constant(std::int64_t c) {
    JetCoeff j;
    if (c != 0) j.terms_.push_back({make_key(0, 0, 0, 0), c});
    return j;
  }
  static JetCoeff from_terms(std::vector<Term> terms) {
    JetCoeff j;
    j.terms_ = std::move(terms);
    j.canonicalize();
    return j;
  }

  /// Accepts polynomials without E, of degree at most 1 in S, with integer coefficients.
  static JetCoeff from_poly(const Poly& p) {
    std::vector<Term> out;
    for (const auto& t : p.terms()) {
      if (t.mono[Var::E] != 0 || t.mono[Var::S] > 1)
        throw std::invalid_argument("JetCoeff::from_poly: coefficient must be E-free and affine in S");
      if (t.coeff.get_den() != 1 || !t.coeff.get_num().fits_slong_p())
        throw std::invalid_argument("JetCoeff::from_poly: coefficient must be a machine integer");
      out.push_back({make_key(t.mono[Var::S], t.mono[Var::X1], t.mono[Var::X2], t.mono[Var::X3]),
                     t.coeff.get_num().get_si()});
    }
    return from_terms(std::move(out));
  }

  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  unsigned max_order() const {
    unsigned m = 0;
    for (const auto& t : terms_) m = std::max(m, order_of(t.first));
    return m;
  }
  /// True when some term carries a time derivative of S (vanishes at e = 0).
  bool has_time_jets() const { return !terms_.empty() && order_of(terms_.back().first) >= 2; }

  friend bool operator==(const JetCoeff&, const JetCoeff&) = default;

  friend JetCoeff operator+(const JetCoeff& a, const JetCoeff& b) { return merge(a, b, 1); }
  friend JetCoeff operator-(const JetCoeff& a, const JetCoeff& b) { return merge(a, b, -1); }
  JetCoeff operator-() const {
    JetCoeff j = *this;
    for (auto& t : j.terms_) t.second = checked_mul(t.second, -1);
    return j;
  }

  std::size_t hash() const {
    std::size_t h = 0x9e3779b97f4a7c15ULL;
    for (const auto& [k, c] : terms_) {
      h ^= std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(k) << 32) ^ static_cast<std::uint64_t>(c)) +
           0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }

  static std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_mul_overflow(a, b, &r)) throw std::overflow_error("JetCoeff coefficient overflow");
    return r;
  }
  static std::int64_t checked_add(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("JetCoeff coefficient overflow");
    return r;
  }

 private:
  static JetCoeff merge(const JetCoeff& a, const JetCoeff& b, std::int64_t sign) {
    JetCoeff out;
    out.terms_.reserve(a.size() + b.size());
    auto ia = a.terms_.begin(), ib = b.terms_.begin();
    while (ia != a.terms_.end() || ib != b.terms_.end()) {
      if (ib == b.terms_.end() || (ia != a.terms_.end() && ia->first < ib->first)) {
        out.terms_.push_back(*ia++);
      } else if (ia == a.terms_.end() || ib->first < ia->first) {
        out.terms_.push_back({ib->first, checked_mul(ib->second, sign)});
        ++ib;
      } else {
        auto c = checked_add(ia->second, checked_mul(ib->second, sign));
        if (c != 0) out.terms_.push_back({ia->first, c});
        ++ia;
        ++ib;
      }
    }
    return out;
  }

  void canonicalize() {
    std::sort(terms_.begin(), terms_.end(), [](const Term& x, const Term& y) { return x.first < y.first; });
    std::vector<Term> out;
    out.reserve(terms_.size());
    for (const auto& t : terms_) {
      if (!out.empty() && out.back().first == t.first)
        out.back().second = checked_add(out.back().second, t.second);
      else
        out.push_back(t);
    }
    std::erase_if(out, [](const Term& t) { return t.second == 0; });
    terms_ = std::move(out);
  }

  std::vector<Term> terms_;
};

struct JetCoeffHash {
  std::size_t operator()(const JetCoeff& c) const { return c.hash(); }
};

inline bool is_identically_zero(const JetCoeff& c) { return c.is_zero(); }

inline JetCoeff derive_space(const JetCoeff& c, int axis) {
  if (axis < 1 || axis > 3) throw std::invalid_argument("derive_space: axis must be 1, 2 or 3");
  std::vector<JetCoeff::Term> out;
  out.reserve(c.size());
  const int shift = 8 * (3 - axis);
  for (const auto& [k, v] : c.terms()) {
    const unsigned e = JetCoeff::exp_of(k, axis);
    if (e == 0) continue;
    out.push_back({k - (JetCoeff::Key{1} << shift), JetCoeff::checked_mul(v, e)});
  }
  return JetCoeff::from_terms(std::move(out));
}

/// d/dt: the S-free part is constant in time, every jet moves up one order.
inline JetCoeff derive_time(const JetCoeff& c, const DerivationParams& = {}) {
  std::vector<JetCoeff::Term> out;
  out.reserve(c.size());
  for (const auto& [k, v] : c.terms()) {
    if (JetCoeff::order_of(k) == 0) continue;
    if (JetCoeff::order_of(k) >= 255) throw std::overflow_error("JetCoeff: time-derivative order exceeds 254");
    out.push_back({k + (JetCoeff::Key{1} << 24), v});
  }
  return JetCoeff::from_terms(std::move(out));
}

/// The S-jets derive_time^k(S) as polynomials, computed once per parameter set.
class SJetTable {
 public:
  explicit SJetTable(DerivationParams params) : params_(std::move(params)) {
    params_.degree_cap = std::max(params_.degree_cap, 4096u);
    jets_.push_back(Poly::var(Var::S));
  }
  const Poly& jet(unsigned k) {
    std::lock_guard lock(mu_);
    while (jets_.size() <= k) jets_.push_back(derive_time(jets_.back(), params_));
    return jets_[k];
  }

 private:
  DerivationParams params_;
  std::vector<Poly> jets_;
  std::mutex mu_;
};

inline Poly to_poly(const JetCoeff& c, SJetTable& table) {
  Poly out;
  for (const auto& [k, v] : c.terms()) {
    Monomial m;
    m[Var::X1] = static_cast<std::uint16_t>(JetCoeff::exp_of(k, 1));
    m[Var::X2] = static_cast<std::uint16_t>(JetCoeff::exp_of(k, 2));
    m[Var::X3] = static_cast<std::uint16_t>(JetCoeff::exp_of(k, 3));
    Poly xpart = Poly::monomial(m, Rational(v));
    const unsigned order = JetCoeff::order_of(k);
    out += order == 0 ? xpart : Poly::mul(table.jet(order - 1), xpart, 1u << 16);
  }
  return out;
}

/// Exact evaluation of JetCoeffs at one point; jet values are cached.
class JetEvaluator {
 public:
  JetEvaluator(const Point& point, const DerivationParams& params) : point_(point), table_(params) {}

  Rational operator()(const JetCoeff& c) {
    Rational acc(0);
    for (const auto& [k, v] : c.terms()) {
      Rational term(v);
      const unsigned order = JetCoeff::order_of(k);
      if (order > 0) {
        const Rational& s = jet_value(order - 1);
        if (s == 0) continue;
        term *= s;
      }
      for (int axis = 1; axis <= 3; ++axis) {
        const unsigned e = JetCoeff::exp_of(k, axis);
        if (e) term *= x_power(axis, e);
      }
      acc += term;
    }
    return acc;
  }

  const Rational& jet_value(unsigned k) {
    while (jet_values_.size() <= k) jet_values_.push_back(evaluate(table_.jet(jet_values_.size()), point_));
    return jet_values_[k];
  }

 private:
  const Rational& x_power(int axis, unsigned e) {
    auto& pw = x_powers_[axis - 1];
    if (pw.empty()) pw.emplace_back(1);
    while (pw.size() <= e) pw.push_back(pw.back() * point_[static_cast<int>(Var::X1) + axis - 1]);
    return pw[e];
  }

  Point point_;
  SJetTable table_;
  std::vector<Rational> jet_values_;
  std::array<std::vector<Rational>, 3> x_powers_;
};

}  // namespace algsolv
