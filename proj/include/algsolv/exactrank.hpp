#pragma once

// Exact rank certification.
//
// rank_mod_p reduces a rational matrix modulo a word-size prime after clearing
// denominators row by row, then eliminates: sparse Markowitz-style pivoting
// first, dense elimination on the Schur complement once it has filled in. Full
// rank modulo p implies full rank over Q, which is the one-sided certificate
// certify_full_rank relies on. rank_rational is a fraction-free (Bareiss)
// oracle for small matrices.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "algsolv/rational.hpp"
#include "algsolv/structural.hpp"

namespace algsolv {

inline bool is_prime_u64(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % p == 0) return n == p;
  }
  auto mulmod = [n](std::uint64_t a, std::uint64_t b) {
    return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % n);
  };
  auto powmod = [&](std::uint64_t a, std::uint64_t e) {
    std::uint64_t r = 1;
    for (; e; e >>= 1, a = mulmod(a, a))
      if (e & 1) r = mulmod(r, a);
    return r;
  };
  std::uint64_t d = n - 1;
  int s = 0;
  while (!(d & 1)) {
    d >>= 1;
    ++s;
  }
  // These bases are deterministic for all 64-bit n.
  for (std::uint64_t a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    std::uint64_t x = powmod(a, d);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 1; i < s; ++i) {
      x = mulmod(x, x);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

class PrimeField {
 public:
  static constexpr std::uint64_t kMersenne61 = (1ULL << 61) - 1;
  static constexpr std::uint64_t kDefaultPrime = kMersenne61;
  static constexpr std::uint64_t kFallbackPrime = (1ULL << 62) - 57;

  explicit PrimeField(std::uint64_t p = kDefaultPrime) : p_(p), mersenne_(p == kMersenne61) {
    if (p >= (1ULL << 63)) throw std::invalid_argument("PrimeField: modulus must be below 2^63");
    if (!is_prime_u64(p)) throw std::invalid_argument("PrimeField: modulus is not prime: " + std::to_string(p));
  }

  std::uint64_t p() const { return p_; }

  std::uint64_t add(std::uint64_t a, std::uint64_t b) const {
    std::uint64_t s = a + b;
    return s >= p_ ? s - p_ : s;
  }
  std::uint64_t sub(std::uint64_t a, std::uint64_t b) const { return a >= b ? a - b : a + p_ - b; }
  std::uint64_t neg(std::uint64_t a) const { return a ? p_ - a : 0; }
  std::uint64_t mul(std::uint64_t a, std::uint64_t b) const {
    const unsigned __int128 x = static_cast<unsigned __int128>(a) * b;
    if (mersenne_) {
      std::uint64_t r = static_cast<std::uint64_t>(x & kMersenne61) + static_cast<std::uint64_t>(x >> 61);
      return r >= kMersenne61 ? r - kMersenne61 : r;
    }
    return static_cast<std::uint64_t>(x % p_);
  }
  std::uint64_t pow(std::uint64_t a, std::uint64_t e) const {
    std::uint64_t r = 1;
    for (; e; e >>= 1, a = mul(a, a))
      if (e & 1) r = mul(r, a);
    return r;
  }
  std::uint64_t inv(std::uint64_t a) const {
    if (a == 0) throw std::domain_error("PrimeField: inverse of zero");
    return pow(a, p_ - 2);
  }
  std::uint64_t reduce(const Integer& z) const {
    Integer r = z % Integer(static_cast<unsigned long>(p_));
    if (r < 0) r += static_cast<unsigned long>(p_);
    return r.get_ui();
  }

 private:
  std::uint64_t p_;
  bool mersenne_;
};

struct DenominatorNotInvertible : std::domain_error {
  using std::domain_error::domain_error;
};

/// Rows of rm, each scaled by the lcm of its denominators, reduced modulo p.
/// Entries reducing to zero are dropped.
inline std::vector<std::vector<std::pair<std::uint32_t, std::uint64_t>>> reduce_rows_mod_p(const RatMatrix& rm,
                                                                                          const PrimeField& f) {
  std::vector<std::vector<std::pair<std::uint32_t, std::uint64_t>>> rows(rm.nrows());
  const Integer p(static_cast<unsigned long>(f.p()));
  for (std::size_t r = 0; r < rm.nrows(); ++r) {
    auto rc = rm.row_cols(r);
    auto rv = rm.row_vals(r);
    Integer l = 1;
    for (auto v : rv) mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), rm.value(v).get_den_mpz_t());
    if (l % p == 0) throw DenominatorNotInvertible("row " + std::to_string(r) + " has a denominator divisible by p");
    for (std::size_t j = 0; j < rc.size(); ++j) {
      const Rational& q = rm.value(rv[j]);
      const std::uint64_t v = f.reduce(q.get_num() * (l / q.get_den()));
      if (v) rows[r].push_back({rc[j], v});
    }
  }
  return rows;
}

struct RankModPOptions {
  // Switch to dense elimination once the active part is at least this dense.
  double dense_switch = 0.05;
};

namespace detail {

using SparseRow = std::vector<std::pair<std::uint32_t, std::uint64_t>>;

inline std::size_t dense_rank(std::vector<std::uint64_t>& a, std::size_t nr, std::size_t nc, const PrimeField& f) {
  std::size_t rank = 0;
  std::vector<std::uint64_t> tmp;
  for (std::size_t c = 0; c < nc && rank < nr; ++c) {
    std::size_t piv = rank;
    while (piv < nr && a[piv * nc + c] == 0) ++piv;
    if (piv == nr) continue;
    if (piv != rank)
      std::swap_ranges(a.begin() + static_cast<std::ptrdiff_t>(piv * nc), a.begin() + static_cast<std::ptrdiff_t>((piv + 1) * nc),
                       a.begin() + static_cast<std::ptrdiff_t>(rank * nc));
    std::uint64_t* prow = &a[rank * nc];
    const std::uint64_t inv = f.inv(prow[c]);
    for (std::size_t j = c; j < nc; ++j) prow[j] = f.mul(prow[j], inv);
    for (std::size_t r = rank + 1; r < nr; ++r) {
      std::uint64_t* row = &a[r * nc];
      const std::uint64_t m = row[c];
      if (m == 0) continue;
      const std::uint64_t neg = f.neg(m);
      for (std::size_t j = c; j < nc; ++j)
        if (prow[j]) row[j] = f.add(row[j], f.mul(neg, prow[j]));
    }
    ++rank;
  }
  return rank;
}

/// row <- row + factor * piv, both sorted by column; exact zeros removed.
inline void axpy_row(SparseRow& row, std::uint64_t factor, const SparseRow& piv, const PrimeField& f, SparseRow& out) {
  out.clear();
  out.reserve(row.size() + piv.size());
  auto a = row.begin();
  auto b = piv.begin();
  while (a != row.end() || b != piv.end()) {
    if (b == piv.end() || (a != row.end() && a->first < b->first)) {
      out.push_back(*a++);
    } else if (a == row.end() || b->first < a->first) {
      out.push_back({b->first, f.mul(factor, b->second)});
      ++b;
    } else {
      const std::uint64_t v = f.add(a->second, f.mul(factor, b->second));
      if (v) out.push_back({a->first, v});
      ++a;
      ++b;
    }
  }
  row.swap(out);
}

}  // namespace detail

/// Rank of rm over GF(p).
inline std::size_t rank_mod_p(const RatMatrix& rm, const PrimeField& f, const RankModPOptions& opt = {}) {
  auto rows = reduce_rows_mod_p(rm, f);
  const std::size_t nr = rm.nrows(), nc = rm.ncols();
  std::vector<bool> row_done(nr, false), col_done(nc, false);
  std::vector<std::vector<std::uint32_t>> col_rows(nc);  // may hold stale row ids
  std::vector<std::size_t> col_count(nc, 0);
  std::size_t active_nnz = 0;
  for (std::uint32_t r = 0; r < nr; ++r)
    for (auto& [c, v] : rows[r]) {
      col_rows[c].push_back(r);
      ++col_count[c];
      ++active_nnz;
    }
  std::size_t rank = 0, active_rows = nr, active_cols = nc;
  for (std::uint32_t r = 0; r < nr; ++r)
    if (rows[r].empty()) {
      row_done[r] = true;
      --active_rows;
    }
  for (std::uint32_t c = 0; c < nc; ++c)
    if (col_count[c] == 0) {
      col_done[c] = true;
      --active_cols;
    }
  using Item = std::pair<std::size_t, std::uint32_t>;  // (count, column)
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (std::uint32_t c = 0; c < nc; ++c)
    if (!col_done[c]) heap.push({col_count[c], c});

  detail::SparseRow scratch;
  std::vector<std::uint32_t> fresh;
  while (active_rows && active_cols && !heap.empty()) {
    const double density = static_cast<double>(active_nnz) / (static_cast<double>(active_rows) * active_cols);
    if (density >= opt.dense_switch && active_rows * active_cols > 4096) break;
    auto [cnt, c] = heap.top();
    heap.pop();
    if (col_done[c] || cnt != col_count[c]) continue;
    // Live rows in column c; drop stale ids.
    std::vector<std::uint32_t> live;
    for (auto r : col_rows[c]) {
      if (row_done[r]) continue;
      auto it = std::lower_bound(rows[r].begin(), rows[r].end(), std::pair<std::uint32_t, std::uint64_t>{c, 0},
                                 [](const auto& x, const auto& y) { return x.first < y.first; });
      if (it != rows[r].end() && it->first == c) live.push_back(r);
    }
    std::sort(live.begin(), live.end());
    live.erase(std::unique(live.begin(), live.end()), live.end());
    col_rows[c] = live;
    if (live.size() != col_count[c]) {
      col_count[c] = live.size();
      if (!live.empty()) {
        heap.push({col_count[c], c});
        continue;
      }
    }
    col_done[c] = true;
    --active_cols;
    if (live.empty()) continue;
    std::uint32_t piv = live.front();
    for (auto r : live)
      if (rows[r].size() < rows[piv].size()) piv = r;
    const auto& prow = rows[piv];
    auto pit = std::lower_bound(prow.begin(), prow.end(), std::pair<std::uint32_t, std::uint64_t>{c, 0},
                                [](const auto& x, const auto& y) { return x.first < y.first; });
    const std::uint64_t pinv = f.inv(pit->second);
    for (auto r : live) {
      if (r == piv) continue;
      auto it = std::lower_bound(rows[r].begin(), rows[r].end(), std::pair<std::uint32_t, std::uint64_t>{c, 0},
                                 [](const auto& x, const auto& y) { return x.first < y.first; });
      const std::uint64_t factor = f.neg(f.mul(it->second, pinv));
      const auto before = rows[r].size();
      // Columns new to this row get the row registered.
      fresh.clear();
      {
        auto a = rows[r].begin();
        for (const auto& [pc, pv] : prow) {
          while (a != rows[r].end() && a->first < pc) ++a;
          if (a == rows[r].end() || a->first != pc) fresh.push_back(pc);
        }
      }
      for (const auto& [rc, rv] : rows[r]) --col_count[rc];
      detail::axpy_row(rows[r], factor, prow, f, scratch);
      for (const auto& [rc, rv] : rows[r]) ++col_count[rc];
      for (auto fc : fresh) col_rows[fc].push_back(r);
      active_nnz = active_nnz - before + rows[r].size();
      if (rows[r].empty()) {
        row_done[r] = true;
        --active_rows;
      }
    }
    for (const auto& [pc, pv] : prow) {
      --col_count[pc];
      --active_nnz;
    }
    row_done[piv] = true;
    --active_rows;
    ++rank;
    // Every column touched by the pivot row changed count; requeue them.
    for (const auto& [pc, pv] : prow)
      if (!col_done[pc]) heap.push({col_count[pc], pc});
    for (auto r : live)
      if (!row_done[r])
        for (const auto& [rc, rv] : rows[r])
          if (!col_done[rc]) heap.push({col_count[rc], rc});
    rows[piv].clear();
    rows[piv].shrink_to_fit();
  }

  // Dense phase on whatever is left.
  std::vector<std::uint32_t> drows, dcols;
  for (std::uint32_t r = 0; r < nr; ++r)
    if (!row_done[r] && !rows[r].empty()) drows.push_back(r);
  std::vector<std::int64_t> cmap(nc, -1);
  for (std::uint32_t c = 0; c < nc; ++c)
    if (!col_done[c]) {
      cmap[c] = static_cast<std::int64_t>(dcols.size());
      dcols.push_back(c);
    }
  if (drows.empty() || dcols.empty()) return rank;
  std::vector<std::uint64_t> dense(drows.size() * dcols.size(), 0);
  for (std::size_t i = 0; i < drows.size(); ++i)
    for (const auto& [c, v] : rows[drows[i]]) {
      if (cmap[c] < 0) throw std::logic_error("rank_mod_p: entry in an eliminated column");
      dense[i * dcols.size() + static_cast<std::size_t>(cmap[c])] = v;
    }
  rows.clear();
  rows.shrink_to_fit();
  return rank + detail::dense_rank(dense, drows.size(), dcols.size(), f);
}

/// Plain dense elimination mod p, used as an independent check of the sparse path.
inline std::size_t rank_mod_p_dense(const RatMatrix& rm, const PrimeField& f) {
  auto rows = reduce_rows_mod_p(rm, f);
  std::vector<std::uint64_t> dense(rm.nrows() * rm.ncols(), 0);
  for (std::size_t r = 0; r < rm.nrows(); ++r)
    for (const auto& [c, v] : rows[r]) dense[r * rm.ncols() + c] = v;
  return detail::dense_rank(dense, rm.nrows(), rm.ncols(), f);
}

struct RankCapExceeded : std::length_error {
  using std::length_error::length_error;
};

/// Exact rank over Q by fraction-free Gaussian elimination.
inline std::size_t rank_rational(const RatMatrix& rm, std::size_t cap = 500) {
  const std::size_t nr = rm.nrows(), nc = rm.ncols();
  if (nr > cap || nc > cap)
    throw RankCapExceeded("rank_rational: " + std::to_string(nr) + "x" + std::to_string(nc) + " exceeds cap " +
                          std::to_string(cap));
  std::vector<std::vector<Integer>> a(nr, std::vector<Integer>(nc, 0));
  for (std::size_t r = 0; r < nr; ++r) {
    auto rc = rm.row_cols(r);
    auto rv = rm.row_vals(r);
    Integer l = 1;
    for (auto v : rv) mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), rm.value(v).get_den_mpz_t());
    for (std::size_t j = 0; j < rc.size(); ++j) {
      const Rational& q = rm.value(rv[j]);
      a[r][rc[j]] = q.get_num() * (l / q.get_den());
    }
  }
  std::size_t rank = 0;
  Integer prev = 1;
  for (std::size_t c = 0; c < nc && rank < nr; ++c) {
    std::size_t piv = rank;
    while (piv < nr && a[piv][c] == 0) ++piv;
    if (piv == nr) continue;
    std::swap(a[piv], a[rank]);
    for (std::size_t r = rank + 1; r < nr; ++r) {
      for (std::size_t j = c + 1; j < nc; ++j) {
        a[r][j] = a[rank][c] * a[r][j] - a[r][c] * a[rank][j];
        mpz_divexact(a[r][j].get_mpz_t(), a[r][j].get_mpz_t(), prev.get_mpz_t());
      }
      a[r][c] = 0;
    }
    prev = a[rank][c];
    ++rank;
  }
  return rank;
}

/// Floating-point rank with partial pivoting; never used as a certificate.
inline std::size_t rank_floating(const RatMatrix& rm, double rel_tol = 1e-10) {
  const std::size_t nr = rm.nrows(), nc = rm.ncols();
  std::vector<double> a(nr * nc, 0.0);
  double scale = 0;
  for (std::size_t r = 0; r < nr; ++r) {
    auto rc = rm.row_cols(r);
    auto rv = rm.row_vals(r);
    for (std::size_t j = 0; j < rc.size(); ++j) {
      a[r * nc + rc[j]] = rm.value(rv[j]).get_d();
      scale = std::max(scale, std::abs(a[r * nc + rc[j]]));
    }
  }
  const double tol = rel_tol * std::max(scale, 1.0) * static_cast<double>(std::max(nr, nc));
  std::size_t rank = 0;
  for (std::size_t c = 0; c < nc && rank < nr; ++c) {
    std::size_t piv = rank;
    for (std::size_t r = rank + 1; r < nr; ++r)
      if (std::abs(a[r * nc + c]) > std::abs(a[piv * nc + c])) piv = r;
    if (std::abs(a[piv * nc + c]) <= tol) continue;
    for (std::size_t j = 0; j < nc; ++j) std::swap(a[piv * nc + j], a[rank * nc + j]);
    for (std::size_t r = rank + 1; r < nr; ++r) {
      const double m = a[r * nc + c] / a[rank * nc + c];
      if (m == 0) continue;
      for (std::size_t j = c; j < nc; ++j) a[r * nc + j] -= m * a[rank * nc + j];
    }
    ++rank;
  }
  return rank;
}

enum class RankConclusion { certified_full_rank, certified_lower_bound, numeric_only };

inline const char* name_of(RankConclusion c) {
  switch (c) {
    case RankConclusion::certified_full_rank: return "certified-full-rank";
    case RankConclusion::certified_lower_bound: return "certified-lower-bound";
    case RankConclusion::numeric_only: return "numeric-only";
  }
  return "?";
}

struct RankCertificate {
  std::size_t rows = 0, cols = 0;
  std::string method = "mod-p";
  std::vector<std::uint64_t> primes;
  std::vector<std::size_t> ranks_mod_p;  // one per prime tried
  std::size_t rank = 0;                  // best exact lower bound
  RankConclusion conclusion = RankConclusion::certified_lower_bound;
  std::optional<std::size_t> floating_rank;
  bool full_rank() const { return conclusion == RankConclusion::certified_full_rank; }
};

struct CertifyOptions {
  std::vector<std::uint64_t> primes{PrimeField::kDefaultPrime, PrimeField::kFallbackPrime};
  bool floating_check = false;
};

/// Full rank modulo a single prime certifies full rational rank. Otherwise the
/// next prime is tried and the best modular rank is reported as a lower bound.
inline RankCertificate certify_full_rank(const RatMatrix& rm, const CertifyOptions& opt = {}) {
  RankCertificate cert;
  cert.rows = rm.nrows();
  cert.cols = rm.ncols();
  const std::size_t full = std::min(cert.rows, cert.cols);
  for (auto p : opt.primes) {
    std::size_t r;
    try {
      r = rank_mod_p(rm, PrimeField(p));
    } catch (const DenominatorNotInvertible&) {
      continue;
    }
    cert.primes.push_back(p);
    cert.ranks_mod_p.push_back(r);
    cert.rank = std::max(cert.rank, r);
    if (r == full) break;
  }
  if (cert.primes.empty()) {
    cert.conclusion = RankConclusion::numeric_only;
  } else {
    cert.conclusion = cert.rank == full ? RankConclusion::certified_full_rank : RankConclusion::certified_lower_bound;
  }
  if (opt.floating_check) {
    cert.floating_rank = rank_floating(rm);
    if (cert.primes.empty()) cert.method = "floating-LU";
  }
  return cert;
}

}  // namespace algsolv
