#pragma once

// Level-by-level prolongation of the eliminated system into the sparse
// polynomial matrix L0.
//
// Rows: equations 1 and 2 differentiated by every alpha with |alpha| <= n,
// equation 3 by every |alpha| <= n + 2; ordered (base equation, index_of(alpha)).
// Columns: every derivative of z1, z2 of order <= n + 3. The six first-order
// space derivatives (d1 z1, d2 z1, d3 z1, d1 z2, d2 z2, d3 z2) come first; the
// rest follow in (unknown, index_of(deriv)) order.
//
// Each equation of level m is obtained from one equation of level m - 1 by a
// single derivation; the parent is reached by decrementing the first nonzero
// axis in the order t, x1, x2, x3.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <istream>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "algsolv/combinatorics.hpp"
#include "algsolv/equation.hpp"
#include "algsolv/jet.hpp"
#include "algsolv/polyring.hpp"

namespace algsolv {

struct RowId {
  int base_eq = 1;  // 1..3
  MultiIndex applied;
  friend auto operator<=>(const RowId&, const RowId&) = default;
};

struct ColId {
  UnknownId unknown = UnknownId::z1;
  MultiIndex deriv;
  friend auto operator<=>(const ColId&, const ColId&) = default;
};

/// Position of a column in the (unknown, index_of(deriv)) order, i.e. z1 block then z2 block.
inline std::uint64_t natural_column_rank(const ColId& c, int max_order) {
  return (c.unknown == UnknownId::z2 ? count_F(max_order) : 0) + index_of(c.deriv);
}

class ColumnLayout {
 public:
  explicit ColumnLayout(int max_order) : max_order_(max_order), per_unknown_(count_F(max_order)) {
    const std::uint64_t n = 2 * per_unknown_;
    natural_to_col_.assign(n, 0);
    col_to_natural_.reserve(n);
    std::vector<std::uint64_t> targets;
    for (auto u : {UnknownId::z1, UnknownId::z2})
      for (int axis = 1; axis <= 3; ++axis)
        targets.push_back(natural_column_rank({u, MultiIndex{}.bumped(axis)}, max_order));
    for (auto t : targets) col_to_natural_.push_back(t);
    for (std::uint64_t k = 0; k < n; ++k)
      if (std::find(targets.begin(), targets.end(), k) == targets.end()) col_to_natural_.push_back(k);
    for (std::uint64_t c = 0; c < n; ++c) natural_to_col_[col_to_natural_[c]] = static_cast<std::uint32_t>(c);
  }

  int max_order() const { return max_order_; }
  std::size_t size() const { return col_to_natural_.size(); }

  std::uint32_t index(const ColId& c) const {
    if (c.deriv.degree() > max_order_) throw std::out_of_range("column derivative order exceeds layout");
    return natural_to_col_[natural_column_rank(c, max_order_)];
  }
  ColId id(std::uint32_t col) const {
    const std::uint64_t k = col_to_natural_.at(col);
    const bool second = k >= per_unknown_;
    return {second ? UnknownId::z2 : UnknownId::z1, multiindex_of(second ? k - per_unknown_ : k)};
  }
  std::vector<ColId> ids() const {
    std::vector<ColId> out;
    out.reserve(size());
    for (std::uint32_t c = 0; c < size(); ++c) out.push_back(id(c));
    return out;
  }

 private:
  int max_order_;
  std::uint64_t per_unknown_;
  std::vector<std::uint32_t> natural_to_col_;
  std::vector<std::uint64_t> col_to_natural_;
};

class RowLayout {
 public:
  explicit RowLayout(int n) : n_(n) {
    offsets_ = {0, count_F(n), 2 * count_F(n), count_G(n)};
  }
  int levels() const { return n_; }
  /// Highest level of base equation eq (1-based).
  int max_level(int eq) const { return eq == 3 ? n_ + 2 : n_; }
  std::size_t size() const { return offsets_[3]; }
  std::uint64_t offset(int eq) const { return offsets_[eq - 1]; }
  std::uint32_t index(const RowId& r) const {
    if (r.applied.degree() > max_level(r.base_eq)) throw std::out_of_range("row level exceeds layout");
    return static_cast<std::uint32_t>(offsets_[r.base_eq - 1] + index_of(r.applied));
  }
  RowId id(std::uint32_t row) const {
    int eq = 1;
    while (row >= offsets_[eq]) ++eq;
    return {eq, multiindex_of(row - offsets_[eq - 1])};
  }
  std::vector<RowId> ids() const {
    std::vector<RowId> out;
    out.reserve(size());
    for (std::uint32_t r = 0; r < size(); ++r) out.push_back(id(r));
    return out;
  }

 private:
  int n_;
  std::array<std::uint64_t, 4> offsets_{};
};

struct PolyHash {
  std::size_t operator()(const Poly& p) const {
    std::size_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) { h = (h ^ v) * 0x100000001b3ULL; };
    for (const auto& t : p.terms()) {
      for (auto e : t.mono.exps) mix(e);
      mix(mpz_get_ui(t.coeff.get_num_mpz_t()));
      mix(mpz_get_ui(t.coeff.get_den_mpz_t()));
      mix(static_cast<std::uint64_t>(mpz_sgn(t.coeff.get_num_mpz_t()) + 1));
    }
    return h;
  }
};

template <class Coeff>
struct CoeffHash;
template <>
struct CoeffHash<Poly> : PolyHash {};
template <>
struct CoeffHash<JetCoeff> : JetCoeffHash {};

inline Rational constant_value(const Poly& p) {
  if (p.size() > 1 || (p.size() == 1 && !(p.terms()[0].mono == Monomial{})))
    throw std::invalid_argument("expected a constant coefficient");
  return p.constant_term();
}
inline Rational constant_value(const JetCoeff& c) {
  if (c.is_zero()) return Rational(0);
  if (c.size() != 1 || c.terms()[0].first != 0) throw std::invalid_argument("expected a constant coefficient");
  return Rational(c.terms()[0].second);
}

/// Sparse matrix with interned polynomial entries and row/column metadata.
template <DifferentialCoefficient Coeff>
class PolyMatrix {
 public:
  struct Entry {
    std::uint32_t col;
    std::uint32_t coeff;  // index into pool()
  };
  struct RhsEntry {
    TermKey key;
    Rational coeff;
  };

  std::size_t nrows() const { return row_ids_.size(); }
  std::size_t ncols() const { return col_ids_.size(); }
  std::size_t nnz() const { return entries_.size(); }

  std::span<const Entry> row(std::size_t r) const {
    return {entries_.data() + row_ptr_[r], entries_.data() + row_ptr_[r + 1]};
  }
  std::span<const RhsEntry> rhs(std::size_t r) const {
    return {rhs_.data() + rhs_ptr_[r], rhs_.data() + rhs_ptr_[r + 1]};
  }
  const Coeff& coeff(const Entry& e) const { return (*pool_)[e.coeff]; }
  const std::vector<Coeff>& pool() const { return *pool_; }
  const RowId& row_id(std::size_t r) const { return row_ids_[r]; }
  const ColId& col_id(std::size_t c) const { return col_ids_[c]; }
  const std::vector<RowId>& row_ids() const { return row_ids_; }
  const std::vector<ColId>& col_ids() const { return col_ids_; }

  /// Rows and columns picked (in the given order) from this matrix; entries share the pool.
  PolyMatrix select(const std::vector<std::uint32_t>& rows, const std::vector<std::uint32_t>& cols) const {
    std::vector<std::int64_t> remap(ncols(), -1);
    for (std::size_t k = 0; k < cols.size(); ++k) remap[cols[k]] = static_cast<std::int64_t>(k);
    PolyMatrix out;
    out.pool_ = pool_;
    out.row_ptr_.assign(1, 0);
    out.rhs_ptr_.assign(1, 0);
    for (auto r : rows) {
      out.row_ids_.push_back(row_ids_[r]);
      std::vector<Entry> picked;
      for (const auto& e : row(r))
        if (remap[e.col] >= 0) picked.push_back({static_cast<std::uint32_t>(remap[e.col]), e.coeff});
      std::sort(picked.begin(), picked.end(), [](const Entry& a, const Entry& b) { return a.col < b.col; });
      out.entries_.insert(out.entries_.end(), picked.begin(), picked.end());
      out.row_ptr_.push_back(out.entries_.size());
      for (const auto& h : rhs(r)) out.rhs_.push_back(h);
      out.rhs_ptr_.push_back(out.rhs_.size());
    }
    for (auto c : cols) out.col_ids_.push_back(col_ids_[c]);
    return out;
  }

  class Builder {
   public:
    Builder(std::vector<RowId> rows, std::vector<ColId> cols) : pending_(rows.size()), pending_rhs_(rows.size()) {
      m_.row_ids_ = std::move(rows);
      m_.col_ids_ = std::move(cols);
    }
    std::uint32_t intern(const Coeff& c) {
      auto [it, inserted] = index_.try_emplace(c, static_cast<std::uint32_t>(pool_.size()));
      if (inserted) pool_.push_back(c);
      return it->second;
    }
    void set_row(std::size_t r, std::vector<std::pair<std::uint32_t, Coeff>> entries, std::vector<RhsEntry> rhs) {
      std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      auto& dst = pending_[r];
      dst.clear();
      for (auto& [col, c] : entries) {
        if (is_identically_zero(c)) continue;
        if (!dst.empty() && dst.back().col == col) throw std::logic_error("duplicate column in row");
        dst.push_back({col, intern(c)});
      }
      pending_rhs_[r] = std::move(rhs);
    }
    PolyMatrix finish() && {
      m_.row_ptr_.assign(1, 0);
      m_.rhs_ptr_.assign(1, 0);
      for (std::size_t r = 0; r < pending_.size(); ++r) {
        m_.entries_.insert(m_.entries_.end(), pending_[r].begin(), pending_[r].end());
        m_.row_ptr_.push_back(m_.entries_.size());
        std::vector<Entry>().swap(pending_[r]);
        m_.rhs_.insert(m_.rhs_.end(), pending_rhs_[r].begin(), pending_rhs_[r].end());
        m_.rhs_ptr_.push_back(m_.rhs_.size());
      }
      m_.pool_ = std::make_shared<const std::vector<Coeff>>(std::move(pool_));
      return std::move(m_);
    }

   private:
    PolyMatrix m_;
    std::vector<std::vector<Entry>> pending_;
    std::vector<std::vector<RhsEntry>> pending_rhs_;
    std::vector<Coeff> pool_;
    std::unordered_map<Coeff, std::uint32_t, CoeffHash<Coeff>> index_;
  };

 private:
  std::vector<RowId> row_ids_;
  std::vector<ColId> col_ids_;
  std::vector<std::uint64_t> row_ptr_{0};
  std::vector<Entry> entries_;
  std::vector<std::uint64_t> rhs_ptr_{0};
  std::vector<RhsEntry> rhs_;
  std::shared_ptr<const std::vector<Coeff>> pool_ = std::make_shared<const std::vector<Coeff>>();
};

template <DifferentialCoefficient Coeff>
using System3 = std::array<Equation<Coeff>, 3>;

inline System3<JetCoeff> to_jet(const System3<Poly>& sys) {
  System3<JetCoeff> out;
  for (std::size_t i = 0; i < sys.size(); ++i) {
    for (const auto& [k, c] : sys[i].lhs) out[i].lhs.push_back({k, JetCoeff::from_poly(c)});
    for (const auto& [k, c] : sys[i].rhs) out[i].rhs.push_back({k, JetCoeff::from_poly(c)});
    out[i].level = sys[i].level;
  }
  return out;
}

/// Axis used to reach alpha from its parent: the first nonzero one in (t, x1, x2, x3).
inline int parent_axis(const MultiIndex& alpha) {
  for (int axis = 0; axis < 4; ++axis)
    if (alpha[axis] > 0) return axis;
  throw std::invalid_argument("parent_axis: zero multi-index has no parent");
}

namespace detail {

template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

struct ProlongOptions {
  DerivationParams params;
  unsigned threads = 1;
};

/// Equations 1-2 prolonged to level n, equation 3 to level n + 2.
template <DifferentialCoefficient Coeff>
PolyMatrix<Coeff> prolong(const System3<Coeff>& system, int n, const ProlongOptions& opt = {}) {
  if (n < 0) throw std::invalid_argument("prolong: negative level");
  const RowLayout rows(n);
  const ColumnLayout cols(n + 3);
  typename PolyMatrix<Coeff>::Builder builder(rows.ids(), cols.ids());

  auto store = [&](int eq, const Equation<Coeff>& e, const MultiIndex& alpha) {
    std::vector<std::pair<std::uint32_t, Coeff>> entries;
    entries.reserve(e.lhs.size());
    for (const auto& [key, c] : e.lhs) {
      if (key.unknown != UnknownId::z1 && key.unknown != UnknownId::z2)
        throw std::invalid_argument("prolong: equations must involve z1, z2 only");
      entries.push_back({cols.index({key.unknown, key.deriv}), c});
    }
    std::vector<typename PolyMatrix<Coeff>::RhsEntry> rhs;
    for (const auto& [key, c] : e.rhs) rhs.push_back({key, constant_value(c)});
    builder.set_row(rows.index({eq, alpha}), std::move(entries), std::move(rhs));
  };

  for (int eq = 1; eq <= 3; ++eq) {
    std::vector<Equation<Coeff>> prev{system[eq - 1]};
    prev[0].level = 0;
    store(eq, prev[0], MultiIndex{});
    for (int m = 1; m <= rows.max_level(eq); ++m) {
      const std::uint64_t first = count_F(m - 1);
      const std::uint64_t prev_first = count_F(m - 2);
      std::vector<Equation<Coeff>> cur(count_E(m));
      std::vector<MultiIndex> alphas(cur.size());
      detail::parallel_for(cur.size(), opt.threads, [&](std::size_t i) {
        const MultiIndex alpha = multiindex_of(first + i);
        const int axis = parent_axis(alpha);
        const MultiIndex parent = alpha.bumped(axis, -1);
        cur[i] = derive_equation(prev[index_of(parent) - prev_first], axis, opt.params);
        alphas[i] = alpha;
      });
      for (std::size_t i = 0; i < cur.size(); ++i) store(eq, cur[i], alphas[i]);
      prev = std::move(cur);
    }
  }
  return std::move(builder).finish();
}

struct PolyMatrixStats {
  std::size_t rows = 0, cols = 0, nnz = 0;
  double density = 0, avg_nnz_per_row = 0;
};

template <DifferentialCoefficient Coeff>
PolyMatrixStats stats(const PolyMatrix<Coeff>& m) {
  PolyMatrixStats s{m.nrows(), m.ncols(), m.nnz(), 0, 0};
  if (s.rows && s.cols) s.density = static_cast<double>(s.nnz) / (static_cast<double>(s.rows) * s.cols);
  if (s.rows) s.avg_nnz_per_row = static_cast<double>(s.nnz) / s.rows;
  return s;
}

/// Rows of base equation eq restricted to the columns of one unknown, in index_of order.
template <DifferentialCoefficient Coeff>
PolyMatrix<Coeff> equation_unknown_block(const PolyMatrix<Coeff>& m, int eq, UnknownId u) {
  std::vector<std::uint32_t> rows, cols;
  for (std::uint32_t r = 0; r < m.nrows(); ++r)
    if (m.row_id(r).base_eq == eq) rows.push_back(r);
  std::sort(rows.begin(), rows.end(), [&](auto a, auto b) {
    return index_of(m.row_id(a).applied) < index_of(m.row_id(b).applied);
  });
  for (std::uint32_t c = 0; c < m.ncols(); ++c)
    if (m.col_id(c).unknown == u) cols.push_back(c);
  std::sort(cols.begin(), cols.end(), [&](auto a, auto b) {
    return index_of(m.col_id(a).deriv) < index_of(m.col_id(b).deriv);
  });
  return m.select(rows, cols);
}

template <DifferentialCoefficient Coeff>
struct EquationBlocks {
  PolyMatrix<Coeff> A1, B1, A2, B2, A3, B3;
};

/// The (A_i | B_i) split: A_i = z1 columns, B_i = z2 columns of equation i.
template <DifferentialCoefficient Coeff>
EquationBlocks<Coeff> submatrix_blocks(const PolyMatrix<Coeff>& m) {
  return {equation_unknown_block(m, 1, UnknownId::z1), equation_unknown_block(m, 1, UnknownId::z2),
          equation_unknown_block(m, 2, UnknownId::z1), equation_unknown_block(m, 2, UnknownId::z2),
          equation_unknown_block(m, 3, UnknownId::z1), equation_unknown_block(m, 3, UnknownId::z2)};
}

// ---------------------------------------------------------------------------
// .polymtx text format
//
//   <rows> <cols> <nnz>
//   <row> <col> <poly>            (1-based, nnz lines, row-major)
//   #rows
//   <row> <base_eq> a0 a1 a2 a3
//   #cols
//   <col> <z1|z2> a0 a1 a2 a3
//   #rhs
//   <row> <phi> a0 a1 a2 a3 <num/den>

inline const Poly& as_poly(const Poly& p, SJetTable&) { return p; }
inline Poly as_poly(const JetCoeff& c, SJetTable& table) { return to_poly(c, table); }

template <DifferentialCoefficient Coeff>
void write_polymtx(std::ostream& out, const PolyMatrix<Coeff>& m, const DerivationParams& params = {}) {
  SJetTable table(params);
  std::vector<std::string> rendered(m.pool().size());
  std::vector<bool> done(m.pool().size(), false);
  out << m.nrows() << ' ' << m.ncols() << ' ' << m.nnz() << '\n';
  for (std::size_t r = 0; r < m.nrows(); ++r) {
    for (const auto& e : m.row(r)) {
      if (!done[e.coeff]) {
        rendered[e.coeff] = to_string(as_poly(m.coeff(e), table));
        done[e.coeff] = true;
      }
      out << r + 1 << ' ' << e.col + 1 << ' ' << rendered[e.coeff] << '\n';
    }
  }
  out << "#rows\n";
  for (std::size_t r = 0; r < m.nrows(); ++r) {
    const auto& id = m.row_id(r);
    out << r + 1 << ' ' << id.base_eq;
    for (int a = 0; a < 4; ++a) out << ' ' << id.applied[a];
    out << '\n';
  }
  out << "#cols\n";
  for (std::size_t c = 0; c < m.ncols(); ++c) {
    const auto& id = m.col_id(c);
    out << c + 1 << ' ' << name_of(id.unknown);
    for (int a = 0; a < 4; ++a) out << ' ' << id.deriv[a];
    out << '\n';
  }
  out << "#rhs\n";
  for (std::size_t r = 0; r < m.nrows(); ++r) {
    for (const auto& h : m.rhs(r)) {
      out << r + 1 << ' ' << name_of(h.key.unknown);
      for (int a = 0; a < 4; ++a) out << ' ' << h.key.deriv[a];
      out << ' ' << to_fraction_string(h.coeff) << '\n';
    }
  }
}

inline UnknownId parse_unknown(const std::string& s) {
  for (auto u : {UnknownId::z1, UnknownId::z2, UnknownId::pi, UnknownId::phi1, UnknownId::phi2, UnknownId::phi3,
                 UnknownId::phi4})
    if (s == name_of(u)) return u;
  throw std::invalid_argument("unknown symbol: " + s);
}

inline PolyMatrix<Poly> read_polymtx(std::istream& in) {
  std::size_t nrows = 0, ncols = 0, nnz = 0;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("polymtx: missing header");
  {
    std::istringstream h(line);
    if (!(h >> nrows >> ncols >> nnz)) throw std::runtime_error("polymtx: malformed header");
  }
  struct Raw {
    std::uint32_t row, col;
    Poly p;
  };
  std::vector<Raw> raw;
  raw.reserve(nnz);
  for (std::size_t k = 0; k < nnz; ++k) {
    if (!std::getline(in, line)) throw std::runtime_error("polymtx: truncated entries");
    std::istringstream l(line);
    std::uint32_t r, c;
    l >> r >> c;
    std::string rest;
    std::getline(l, rest);
    raw.push_back({r - 1, c - 1, parse_poly(rest)});
  }
  std::vector<RowId> rows(nrows);
  std::vector<ColId> cols(ncols);
  std::vector<std::vector<PolyMatrix<Poly>::RhsEntry>> rhs(nrows);
  std::string section;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      section = line;
      continue;
    }
    std::istringstream l(line);
    std::size_t idx;
    l >> idx;
    --idx;
    MultiIndex d;
    if (section == "#rows") {
      l >> rows.at(idx).base_eq;
      for (int a = 0; a < 4; ++a) l >> d[a];
      rows[idx].applied = d;
    } else if (section == "#cols") {
      std::string u;
      l >> u;
      for (int a = 0; a < 4; ++a) l >> d[a];
      cols.at(idx) = {parse_unknown(u), d};
    } else if (section == "#rhs") {
      std::string u, q;
      l >> u;
      for (int a = 0; a < 4; ++a) l >> d[a];
      l >> q;
      rhs.at(idx).push_back({{parse_unknown(u), d}, parse_rational(q)});
    } else {
      throw std::runtime_error("polymtx: data outside a section");
    }
  }
  PolyMatrix<Poly>::Builder b(rows, cols);
  std::vector<std::vector<std::pair<std::uint32_t, Poly>>> per_row(nrows);
  for (auto& e : raw) per_row.at(e.row).push_back({e.col, std::move(e.p)});
  for (std::size_t r = 0; r < nrows; ++r) b.set_row(r, std::move(per_row[r]), std::move(rhs[r]));
  return std::move(b).finish();
}

}  // namespace algsolv
