#pragma once

// A linear PDE written as an algebraic row: a sparse map from
// (unknown, derivative multi-index) to a coefficient in some differential
// ring. The coefficient type is a template parameter so the same machinery
// runs on full polynomials (Poly) and on the compact jet form used for the
// large prolongation (JetCoeff).

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "algsolv/combinatorics.hpp"
#include "algsolv/polyring.hpp"

namespace algsolv {

enum class UnknownId : std::uint8_t { z1, z2, pi, phi1, phi2, phi3, phi4 };

inline const char* name_of(UnknownId u) {
  switch (u) {
    case UnknownId::z1: return "z1";
    case UnknownId::z2: return "z2";
    case UnknownId::pi: return "pi";
    case UnknownId::phi1: return "phi1";
    case UnknownId::phi2: return "phi2";
    case UnknownId::phi3: return "phi3";
    case UnknownId::phi4: return "phi4";
  }
  return "?";
}

inline bool is_rhs_symbol(UnknownId u) { return u >= UnknownId::phi1; }

struct TermKey {
  UnknownId unknown = UnknownId::z1;
  MultiIndex deriv;

  friend auto operator<=>(const TermKey&, const TermKey&) = default;
  std::string to_string() const { return std::string("d") + deriv.to_string() + " " + name_of(unknown); }
};

/// What a coefficient ring must provide for equations to be prolonged over it.
template <class C>
concept DifferentialCoefficient = requires(const C& a, const C& b, int axis, const DerivationParams& params) {
  { a + b } -> std::convertible_to<C>;
  { a - b } -> std::convertible_to<C>;
  { -a } -> std::convertible_to<C>;
  { derive_space(a, axis) } -> std::convertible_to<C>;
  { derive_time(a, params) } -> std::convertible_to<C>;
  { is_identically_zero(a) } -> std::convertible_to<bool>;
};

template <DifferentialCoefficient Coeff>
struct Equation {
  using Entry = std::pair<TermKey, Coeff>;

  std::vector<Entry> lhs;  // sorted by key, no zero coefficient
  std::vector<Entry> rhs;  // only phi symbols
  int level = 0;

  const Coeff* find_lhs(const TermKey& key) const { return find_in(lhs, key); }
  const Coeff* find_rhs(const TermKey& key) const { return find_in(rhs, key); }

  void add_lhs(UnknownId u, const MultiIndex& d, const Coeff& c) { add_to(lhs, {u, d}, c); }
  void add_rhs(UnknownId u, const MultiIndex& d, const Coeff& c) { add_to(rhs, {u, d}, c); }

  bool mentions(UnknownId u) const {
    return std::any_of(lhs.begin(), lhs.end(), [u](const Entry& e) { return e.first.unknown == u; });
  }

  int max_order() const {
    int m = 0;
    for (const auto& [k, c] : lhs) m = std::max(m, k.deriv.degree());
    return m;
  }

  friend bool operator==(const Equation& a, const Equation& b) { return a.lhs == b.lhs && a.rhs == b.rhs; }

  /// Sorts, merges equal keys, and drops identically zero coefficients.
  static std::vector<Entry> normalized(std::vector<Entry> entries) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& x, const Entry& y) { return x.first < y.first; });
    std::vector<Entry> out;
    out.reserve(entries.size());
    for (auto& e : entries) {
      if (!out.empty() && out.back().first == e.first)
        out.back().second = out.back().second + e.second;
      else
        out.push_back(std::move(e));
    }
    std::erase_if(out, [](const Entry& e) { return is_identically_zero(e.second); });
    return out;
  }

 private:
  static const Coeff* find_in(const std::vector<Entry>& v, const TermKey& key) {
    auto it = std::lower_bound(v.begin(), v.end(), key, [](const Entry& e, const TermKey& k) { return e.first < k; });
    return (it != v.end() && it->first == key) ? &it->second : nullptr;
  }
  static void add_to(std::vector<Entry>& v, const TermKey& key, const Coeff& c) {
    auto it = std::lower_bound(v.begin(), v.end(), key, [](const Entry& e, const TermKey& k) { return e.first < k; });
    if (it != v.end() && it->first == key) {
      it->second = it->second + c;
      if (is_identically_zero(it->second)) v.erase(it);
    } else if (!is_identically_zero(c)) {
      v.insert(it, {key, c});
    }
  }
};

template <DifferentialCoefficient Coeff>
Coeff derive_along(const Coeff& c, int axis, const DerivationParams& params) {
  return axis == kT ? Coeff(derive_time(c, params)) : Coeff(derive_space(c, axis));
}

/// Applies d/d(axis) to a whole equation: each term c * D^beta u becomes
/// (d c) * D^beta u + c * D^(beta + axis) u. The right-hand side is handled the same way.
template <DifferentialCoefficient Coeff>
Equation<Coeff> derive_equation(const Equation<Coeff>& eq, int axis, const DerivationParams& params = {}) {
  using Entry = typename Equation<Coeff>::Entry;
  auto derive_side = [&](const std::vector<Entry>& side) {
    std::vector<Entry> acc;
    acc.reserve(2 * side.size());
    for (const auto& [key, c] : side) {
      Coeff dc = derive_along(c, axis, params);
      if (!is_identically_zero(dc)) acc.push_back({key, std::move(dc)});
      acc.push_back({TermKey{key.unknown, key.deriv.bumped(axis)}, c});
    }
    return Equation<Coeff>::normalized(std::move(acc));
  };
  Equation<Coeff> out;
  out.lhs = derive_side(eq.lhs);
  out.rhs = derive_side(eq.rhs);
  out.level = eq.level + 1;
  return out;
}

template <DifferentialCoefficient Coeff>
Equation<Coeff> operator-(const Equation<Coeff>& a, const Equation<Coeff>& b) {
  using Entry = typename Equation<Coeff>::Entry;
  auto combine = [](const std::vector<Entry>& x, const std::vector<Entry>& y) {
    std::vector<Entry> acc(x.begin(), x.end());
    for (const auto& [k, c] : y) acc.push_back({k, -c});
    return Equation<Coeff>::normalized(std::move(acc));
  };
  Equation<Coeff> out;
  out.lhs = combine(a.lhs, b.lhs);
  out.rhs = combine(a.rhs, b.rhs);
  out.level = std::max(a.level, b.level);
  return out;
}

}  // namespace algsolv
