#pragma once

// Hand-rolled generators and brute-force oracles shared by the tests.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "algsolv/pipeline.hpp"

namespace testsupport {

using namespace algsolv;

struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

  Rational small_rational(bool nonzero = false) {
    for (;;) {
      Rational q(uniform(-9, 9), uniform(1, 5));
      q.canonicalize();
      if (!nonzero || q != 0) return q;
    }
  }

  Poly poly(int max_terms = 4, int max_exp = 3) {
    std::vector<Poly::Term> t;
    const int n = uniform(0, max_terms);
    for (int k = 0; k < n; ++k) {
      Monomial m;
      for (auto& e : m.exps) e = static_cast<std::uint16_t>(uniform(0, max_exp));
      t.push_back({m, small_rational(true)});
    }
    return Poly::from_terms(std::move(t));
  }

  /// Affine in S, no E, integer coefficients: the shape JetCoeff::from_poly accepts.
  Poly jet_compatible_poly(int max_terms = 4) {
    std::vector<Poly::Term> t;
    const int n = uniform(0, max_terms);
    for (int k = 0; k < n; ++k) {
      Monomial m;
      m[Var::S] = static_cast<std::uint16_t>(uniform(0, 1));
      for (auto v : {Var::X1, Var::X2, Var::X3}) m[v] = static_cast<std::uint16_t>(uniform(0, 3));
      t.push_back({m, Rational(uniform(-6, 6))});
    }
    return Poly::from_terms(std::move(t));
  }

  JetCoeff jet(int max_terms = 4, int max_order = 3) {
    std::vector<JetCoeff::Term> t;
    const int n = uniform(0, max_terms);
    for (int k = 0; k < n; ++k)
      t.push_back({JetCoeff::make_key(uniform(0, max_order), uniform(0, 3), uniform(0, 3), uniform(0, 3)),
                   uniform(-6, 6)});
    return JetCoeff::from_terms(std::move(t));
  }

  Point point() {
    Point p;
    for (auto& x : p) x = small_rational();
    return p;
  }

  /// Random sparse matrix; with planted = true some rows are combinations of others.
  RatMatrix matrix(int nr, int nc, double density, bool planted = false) {
    std::vector<std::vector<Rational>> a(nr, std::vector<Rational>(nc));
    for (auto& row : a)
      for (auto& x : row)
        if (coin(density)) x = small_rational(true);
    if (planted && nr >= 3) {
      const int copies = uniform(1, nr / 3);
      for (int k = 0; k < copies; ++k) {
        const int dst = uniform(0, nr - 1), s1 = uniform(0, nr - 1), s2 = uniform(0, nr - 1);
        if (dst == s1 || dst == s2) continue;
        const Rational c1 = small_rational(), c2 = small_rational();
        for (int j = 0; j < nc; ++j) a[dst][j] = c1 * a[s1][j] + c2 * a[s2][j];
      }
    }
    std::vector<Triplet> t;
    for (int i = 0; i < nr; ++i)
      for (int j = 0; j < nc; ++j)
        if (a[i][j] != 0) t.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), a[i][j]});
    return RatMatrix::from_triplets(nr, nc, std::move(t));
  }
};

/// All multi-indices of total degree d, by nested loops.
inline std::vector<MultiIndex> brute_degree(int d) {
  std::vector<MultiIndex> out;
  for (int a0 = 0; a0 <= d; ++a0)
    for (int a1 = 0; a0 + a1 <= d; ++a1)
      for (int a2 = 0; a0 + a1 + a2 <= d; ++a2) out.push_back(MultiIndex{a0, a1, a2, d - a0 - a1 - a2});
  return out;
}

/// Maximum matching size by trying every permutation (square matrices).
inline std::size_t brute_sprank_square(const RatMatrix& m) {
  const std::size_t n = m.nrows();
  std::vector<std::vector<bool>> nz(n, std::vector<bool>(n, false));
  for (std::size_t r = 0; r < n; ++r)
    for (auto c : m.row_cols(r)) nz[r][c] = true;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t k = 0;
    for (std::size_t r = 0; r < n; ++r) k += nz[r][perm[r]];
    best = std::max(best, k);
  } while (best < n && std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Exact derivative along an axis by Newton forward differences: for g of degree
/// <= D, g'(0) = sum_{k=1..D} (-1)^(k+1) Delta^k g(0) / k.
inline Rational finite_difference_derivative(const Poly& p, int axis, const Point& at) {
  const int var = static_cast<int>(Var::X1) + axis - 1;
  const int deg = static_cast<int>(p.degree_in(static_cast<Var>(var)));
  std::vector<Rational> g;
  for (int k = 0; k <= deg; ++k) {
    Point q = at;
    q[var] += k;
    g.push_back(evaluate(p, q));
  }
  Rational out(0);
  for (int k = 1; k <= deg; ++k) {
    for (int j = 0; j + k <= deg; ++j) g[j] = g[j + 1] - g[j];  // g[0] becomes Delta^k g(0)
    Rational term = g[0] / k;
    out += (k % 2 == 1) ? term : -term;
  }
  return out;
}

inline std::string polymtx_text(const PolyMatrix<JetCoeff>& m) {
  std::ostringstream os;
  write_polymtx(os, m);
  return os.str();
}

inline PolyMatrix<JetCoeff> build_jet(int n, unsigned threads = 1, const DerivationParams& params = {}) {
  const auto sys = build_eliminated_system(params);
  return prolong(to_jet(System3<Poly>{sys[0], sys[1], sys[2]}), n, ProlongOptions{params, threads});
}

// ---------------------------------------------------------------------------
// Property suites. Each runs `cases` randomized cases and reports failures.

struct SuiteResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  std::string first_failure{};
  bool ok() const { return failures == 0 && cases > 0; }
};

namespace detail {
inline void fail(SuiteResult& r, const std::string& why) {
  if (r.failures++ == 0) r.first_failure = why;
}
}  // namespace detail

inline SuiteResult leibniz_and_commutation(int cases, std::uint64_t seed = 1) {
  SuiteResult r; r.name = "derivations: Leibniz and commutation";
  Gen g(seed);
  DerivationParams params;
  for (int k = 0; k < cases; ++k, ++r.cases) {
    params.nu = g.small_rational(true);
    const Poly a = g.poly(), b = g.poly();
    auto D = [&](int axis, const Poly& p) { return axis == 0 ? derive_time(p, params) : derive_space(p, axis); };
    for (int i = 0; i <= 3; ++i) {
      if (D(i, a * b) != D(i, a) * b + a * D(i, b)) detail::fail(r, "Leibniz fails on axis " + std::to_string(i));
      if (D(i, a + b) != D(i, a) + D(i, b)) detail::fail(r, "additivity fails on axis " + std::to_string(i));
      for (int j = 0; j <= 3; ++j)
        if (D(i, D(j, a)) != D(j, D(i, a))) detail::fail(r, "axes do not commute");
    }
    // compact jets commute with the map back to polynomials
    const JetCoeff jc = g.jet();
    SJetTable table(params);
    for (int i = 1; i <= 3; ++i)
      if (to_poly(derive_space(jc, i), table) != derive_space(to_poly(jc, table), i))
        detail::fail(r, "JetCoeff space derivative disagrees with Poly");
    if (to_poly(derive_time(jc), table) != derive_time(to_poly(jc, table), params))
      detail::fail(r, "JetCoeff time derivative disagrees with Poly");
  }
  return r;
}

inline SuiteResult evaluation_homomorphism(int cases, std::uint64_t seed = 2) {
  SuiteResult r; r.name = "evaluation homomorphism";
  Gen g(seed);
  for (int k = 0; k < cases; ++k, ++r.cases) {
    const Poly a = g.poly(), b = g.poly();
    const Point p = g.point();
    if (evaluate(a + b, p) != evaluate(a, p) + evaluate(b, p)) detail::fail(r, "sum");
    if (evaluate(a * b, p) != evaluate(a, p) * evaluate(b, p)) detail::fail(r, "product");
    const Rational c = g.small_rational();
    if (evaluate(Poly(c), p) != c) detail::fail(r, "constant");
    DerivationParams params;
    params.nu = g.small_rational(true);
    const JetCoeff jc = g.jet();
    SJetTable table(params);
    JetEvaluator ev(p, params);
    if (ev(jc) != evaluate(to_poly(jc, table), p)) detail::fail(r, "JetEvaluator disagrees with evaluate(to_poly)");
  }
  return r;
}

inline SuiteResult sprank_bounds_rank(int cases, std::uint64_t seed = 3) {
  SuiteResult r; r.name = "sprank >= exact rank (<= 12x12)";
  Gen g(seed);
  for (int k = 0; k < cases; ++k, ++r.cases) {
    const auto m = g.matrix(g.uniform(1, 12), g.uniform(1, 12), g.uniform(5, 60) / 100.0, g.coin());
    const auto s = sprank(m);
    const auto rk = rank_rational(m);
    if (s < rk) detail::fail(r, "sprank " + std::to_string(s) + " < rank " + std::to_string(rk));
    if (!is_maximum_matching(m, hopcroft_karp(m))) detail::fail(r, "Hopcroft-Karp matching not maximum");
    if (!is_maximum_matching(m, maxtrans_dfs(m))) detail::fail(r, "DFS matching not maximum");
  }
  return r;
}

inline SuiteResult sprank_vs_permutations(int cases, std::uint64_t seed = 4) {
  SuiteResult r; r.name = "sprank vs permutation brute force (<= 8x8)";
  Gen g(seed);
  for (int k = 0; k < cases; ++k, ++r.cases) {
    const int n = g.uniform(1, 8);
    const auto m = g.matrix(n, n, g.uniform(5, 50) / 100.0);
    const auto s = sprank(m), b = brute_sprank_square(m), d = maxtrans_dfs(m).size;
    if (s != b || d != b)
      detail::fail(r, "sprank " + std::to_string(s) + "/" + std::to_string(d) + " vs brute force " + std::to_string(b));
  }
  return r;
}

inline SuiteResult modp_vs_bareiss(int cases, std::uint64_t seed = 5) {
  SuiteResult r; r.name = "rank mod p vs Bareiss (<= 20x20)";
  Gen g(seed);
  const PrimeField f61, f62(PrimeField::kFallbackPrime);
  for (int k = 0; k < cases; ++k, ++r.cases) {
    const auto m = g.matrix(g.uniform(1, 20), g.uniform(1, 20), g.uniform(5, 70) / 100.0, g.coin(0.7));
    const auto exact = rank_rational(m);
    const auto a = rank_mod_p(m, f61), b = rank_mod_p(m, f62), c = rank_mod_p_dense(m, f61);
    if (a != exact || b != exact || c != exact)
      detail::fail(r, "Bareiss " + std::to_string(exact) + " vs mod p " + std::to_string(a) + "/" +
                          std::to_string(b) + "/" + std::to_string(c));
  }
  return r;
}

inline SuiteResult dm_staircase(int cases, std::uint64_t seed = 6) {
  SuiteResult r; r.name = "DM staircase validity";
  Gen g(seed);
  for (int k = 0; k < cases; ++k, ++r.cases) {
    const auto m = g.matrix(g.uniform(1, 25), g.uniform(1, 25), g.uniform(3, 30) / 100.0);
    const auto dm = dm_decompose(m, g.coin() ? MatchingMethod::hopcroft_karp : MatchingMethod::maxtrans_dfs);
    if (!dm_staircase_valid(m, dm)) detail::fail(r, "staircase violated");
    // fine blocks tile the square part and each is structurally nonsingular
    std::size_t covered = 0, fine_sprank = 0;
    for (const auto& b : dm.fine_blocks) {
      covered += b.rows();
      if (b.rows() != b.cols()) detail::fail(r, "fine block not square");
      fine_sprank += sprank(m.submatrix(dm.rows_of(b), dm.cols_of(b)));
    }
    const auto sq = dm.square();
    if (covered != sq.rows()) detail::fail(r, "fine blocks do not tile the square part");
    if (fine_sprank != sprank(m.submatrix(dm.rows_of(sq), dm.cols_of(sq))))
      detail::fail(r, "fine block spranks do not sum to the square part's sprank");
    if (dm.under().rows() + sq.rows() + dm.over_matched_rows != dm.matching.size)
      detail::fail(r, "coarse parts do not account for the matching");
  }
  return r;
}

inline SuiteResult thread_determinism(int cases, std::uint64_t seed = 7) {
  SuiteResult r; r.name = "determinism across thread counts";
  Gen g(seed);
  std::vector<std::string> reference(6);
  for (int n = 0; n <= 5; ++n) reference[n] = polymtx_text(build_jet(n, 1));
  for (int k = 0; k < cases; ++k, ++r.cases) {
    const int n = g.uniform(0, 5);
    const unsigned threads = static_cast<unsigned>(g.uniform(2, 6));
    if (polymtx_text(build_jet(n, threads)) != reference[n])
      detail::fail(r, "level " + std::to_string(n) + " differs with " + std::to_string(threads) + " threads");
  }
  return r;
}

inline std::vector<SuiteResult> all_property_suites(int cases) {
  return {leibniz_and_commutation(cases), evaluation_homomorphism(cases), sprank_bounds_rank(cases),
          sprank_vs_permutations(cases),  modp_vs_bareiss(cases),         dm_staircase(cases),
          thread_determinism(cases)};
}

}  // namespace testsupport
