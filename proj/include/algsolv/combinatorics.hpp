#pragma once

// Multi-indices over (t, x1, x2, x3) and the counting functions that size
// every matrix of the prolonged system.
//
//   E(n) = #{alpha : |alpha| = n}        = (n+1)(n+2)(n+3)/6
//   F(n) = #{alpha : |alpha| <= n}       = C(n+4, 4)
//   G(n) = 2F(n) + F(n+2)                 rows after prolongation
//   H(n) = 2F(n+3)                        columns (derivatives of z1, z2)
//
// Every count is an exact 64-bit integer; overflow throws instead of wrapping.

#include <array>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace algsolv {

/// Derivative orders along (t, x1, x2, x3).
struct MultiIndex {
  std::array<int, 4> a{0, 0, 0, 0};

  constexpr MultiIndex() = default;
  constexpr MultiIndex(int t, int x1, int x2, int x3) : a{t, x1, x2, x3} {}

  constexpr int operator[](int axis) const { return a[axis]; }
  constexpr int& operator[](int axis) { return a[axis]; }
  constexpr int degree() const { return a[0] + a[1] + a[2] + a[3]; }

  constexpr MultiIndex bumped(int axis, int by = 1) const {
    MultiIndex m = *this;
    m.a[axis] += by;
    return m;
  }
  constexpr MultiIndex operator+(const MultiIndex& o) const {
    return {a[0] + o.a[0], a[1] + o.a[1], a[2] + o.a[2], a[3] + o.a[3]};
  }
  constexpr bool dominates(const MultiIndex& o) const {
    return a[0] >= o.a[0] && a[1] >= o.a[1] && a[2] >= o.a[2] && a[3] >= o.a[3];
  }

  friend constexpr auto operator<=>(const MultiIndex&, const MultiIndex&) = default;

  std::string to_string() const {
    return "(" + std::to_string(a[0]) + "," + std::to_string(a[1]) + "," + std::to_string(a[2]) + "," +
           std::to_string(a[3]) + ")";
  }
};

/// Axis numbering used by every derivation routine.
enum Axis : int { kT = 0, kX1 = 1, kX2 = 2, kX3 = 3 };

namespace detail {

inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw std::overflow_error("multi-index count overflows 64 bits");
  return r;
}

inline std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("multi-index count overflows 64 bits");
  return r;
}

/// C(n + k, k), built so every intermediate is itself a binomial coefficient.
inline std::uint64_t binom_shifted(std::uint64_t n, unsigned k) {
  std::uint64_t c = 1;
  for (unsigned i = 1; i <= k; ++i) c = checked_mul(c, n + i) / i;
  return c;
}

}  // namespace detail

inline std::uint64_t count_E(std::int64_t n) {
  if (n < 0) return 0;
  return detail::binom_shifted(static_cast<std::uint64_t>(n), 3);
}

inline std::uint64_t count_F(std::int64_t n) {
  if (n < 0) return 0;
  return detail::binom_shifted(static_cast<std::uint64_t>(n), 4);
}

inline std::uint64_t count_G(std::int64_t n) {
  if (n < 0) throw std::invalid_argument("count_G: negative level");
  return detail::checked_add(detail::checked_mul(2, count_F(n)), count_F(n + 2));
}

inline std::uint64_t count_H(std::int64_t n) {
  if (n < 0) throw std::invalid_argument("count_H: negative level");
  return detail::checked_mul(2, count_F(n + 3));
}

/// G(n) - H(n); negative below n = 19.
inline std::int64_t count_G_minus_H(std::int64_t n) {
  return static_cast<std::int64_t>(count_G(n)) - static_cast<std::int64_t>(count_H(n));
}

/// The bijection onto 4-subsets of {1, ..., n+4}; strictly increasing.
inline std::array<int, 4> subset_encode(const MultiIndex& alpha, int n) {
  for (int v : alpha.a)
    if (v < 0) throw std::invalid_argument("subset_encode: negative entry");
  if (alpha.degree() > n)
    throw std::invalid_argument("subset_encode: |alpha| = " + std::to_string(alpha.degree()) + " exceeds n = " +
                                std::to_string(n));
  return {alpha[0] + 1, alpha[0] + alpha[1] + 2, alpha[0] + alpha[1] + alpha[2] + 3, alpha.degree() + 4};
}

// Graded order: every index of degree m precedes every index of degree m+1.
// Inside a degree the order is descending lexicographic on (a1, a2, a3, a0),
// which lists degree 1 as d1, d2, d3, dt and degree 2 as
// d11, d12, d13, d1t, d22, d23, d2t, d33, d3t, dtt.

/// Position of alpha inside its own degree block.
inline std::uint64_t rank_within_degree(const MultiIndex& alpha) {
  const int d = alpha.degree();
  const int a1 = alpha[1], a2 = alpha[2], a3 = alpha[3];
  std::uint64_t r = 0;
  // b1 > a1: the remaining d - b1 spreads over (b2, b3, b0).
  for (int b1 = a1 + 1; b1 <= d; ++b1) {
    std::uint64_t rest = static_cast<std::uint64_t>(d - b1);
    r += (rest + 1) * (rest + 2) / 2;
  }
  // b1 = a1, b2 > a2: the remaining spreads over (b3, b0).
  for (int b2 = a2 + 1; b2 <= d - a1; ++b2) r += static_cast<std::uint64_t>(d - a1 - b2 + 1);
  // b1 = a1, b2 = a2, b3 > a3: b0 is forced.
  r += static_cast<std::uint64_t>(d - a1 - a2 - a3);
  return r;
}

inline std::uint64_t index_of(const MultiIndex& alpha) {
  return count_F(alpha.degree() - 1) + rank_within_degree(alpha);
}

inline MultiIndex multiindex_of(std::uint64_t k) {
  int d = 0;
  while (count_F(d) <= k) ++d;
  std::uint64_t r = k - count_F(d - 1);
  MultiIndex out;
  // Walk the same cases as rank_within_degree, taking the largest coordinate first.
  int b1 = d;
  for (;; --b1) {
    std::uint64_t rest = static_cast<std::uint64_t>(d - b1);
    std::uint64_t block = (rest + 1) * (rest + 2) / 2;
    if (r < block) break;
    r -= block;
  }
  int b2 = d - b1;
  for (;; --b2) {
    std::uint64_t block = static_cast<std::uint64_t>(d - b1 - b2 + 1);
    if (r < block) break;
    r -= block;
  }
  int b3 = d - b1 - b2 - static_cast<int>(r);
  out[1] = b1;
  out[2] = b2;
  out[3] = b3;
  out[0] = d - b1 - b2 - b3;
  return out;
}

}  // namespace algsolv
