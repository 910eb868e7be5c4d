#pragma once

// Evaluation of a polynomial matrix at a point, and the structural linear
// algebra run on the result: null columns, maximum matching (structural
// rank), Dulmage-Mendelsohn coarse and fine decompositions, and the
// (P 0; Q R) partition together with its robustness check against entries
// that only vanish at the evaluation point.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <istream>
#include <ostream>
#include <sstream>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "algsolv/jet.hpp"
#include "algsolv/prolongation.hpp"
#include "algsolv/rational.hpp"

namespace algsolv {

struct Triplet {
  std::uint32_t row, col;
  Rational value;
};

/// Sparse rational matrix with consistent CSR and CSC views. Values live in a
/// shared pool so that submatrices are cheap. source_rows / source_cols map
/// back to the matrix this one was evaluated or extracted from.
class RatMatrix {
 public:
  RatMatrix() = default;

  static RatMatrix from_triplets(std::size_t nrows, std::size_t ncols, std::vector<Triplet> t) {
    std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    auto pool = std::make_shared<std::vector<Rational>>();
    std::vector<std::pair<std::uint32_t, std::uint32_t>> rc;
    std::vector<std::uint32_t> vals;
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (t[k].row >= nrows || t[k].col >= ncols) throw std::out_of_range("triplet outside matrix");
      if (!rc.empty() && rc.back() == std::pair{t[k].row, t[k].col}) {
        (*pool)[vals.back()] += t[k].value;
        continue;
      }
      rc.push_back({t[k].row, t[k].col});
      vals.push_back(static_cast<std::uint32_t>(pool->size()));
      pool->push_back(t[k].value);
    }
    std::vector<std::uint32_t> rows, cols, keep;
    for (std::size_t k = 0; k < rc.size(); ++k) {
      if ((*pool)[vals[k]] == 0) continue;
      rows.push_back(rc[k].first);
      cols.push_back(rc[k].second);
      keep.push_back(vals[k]);
    }
    return from_sorted(nrows, ncols, rows, cols, keep, std::move(pool));
  }

  /// Entries given row-major sorted, values as indices into pool (all nonzero).
  static RatMatrix from_sorted(std::size_t nrows, std::size_t ncols, const std::vector<std::uint32_t>& rows,
                               std::vector<std::uint32_t> cols, std::vector<std::uint32_t> vals,
                               std::shared_ptr<const std::vector<Rational>> pool) {
    RatMatrix m;
    m.nrows_ = nrows;
    m.ncols_ = ncols;
    m.pool_ = std::move(pool);
    m.row_ptr_.assign(nrows + 1, 0);
    for (auto r : rows) ++m.row_ptr_[r + 1];
    std::partial_sum(m.row_ptr_.begin(), m.row_ptr_.end(), m.row_ptr_.begin());
    m.col_idx_ = std::move(cols);
    m.val_idx_ = std::move(vals);
    m.source_rows_.resize(nrows);
    m.source_cols_.resize(ncols);
    std::iota(m.source_rows_.begin(), m.source_rows_.end(), 0u);
    std::iota(m.source_cols_.begin(), m.source_cols_.end(), 0u);
    m.build_csc();
    return m;
  }

  std::size_t nrows() const { return nrows_; }
  std::size_t ncols() const { return ncols_; }
  std::size_t nnz() const { return col_idx_.size(); }

  std::span<const std::uint32_t> row_cols(std::size_t r) const {
    return {col_idx_.data() + row_ptr_[r], col_idx_.data() + row_ptr_[r + 1]};
  }
  std::span<const std::uint32_t> row_vals(std::size_t r) const {
    return {val_idx_.data() + row_ptr_[r], val_idx_.data() + row_ptr_[r + 1]};
  }
  std::span<const std::uint32_t> col_rows(std::size_t c) const {
    return {row_idx_.data() + col_ptr_[c], row_idx_.data() + col_ptr_[c + 1]};
  }
  std::size_t col_count(std::size_t c) const { return col_ptr_[c + 1] - col_ptr_[c]; }
  const Rational& value(std::uint32_t val_index) const { return (*pool_)[val_index]; }

  Rational at(std::size_t r, std::size_t c) const {
    auto cols = row_cols(r);
    auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<std::uint32_t>(c));
    if (it == cols.end() || *it != c) return Rational(0);
    return value(row_vals(r)[it - cols.begin()]);
  }

  const std::vector<std::uint32_t>& source_rows() const { return source_rows_; }
  const std::vector<std::uint32_t>& source_cols() const { return source_cols_; }

  /// Rows and columns picked in the given order. Provenance composes.
  RatMatrix submatrix(const std::vector<std::uint32_t>& rows, const std::vector<std::uint32_t>& cols) const {
    std::vector<std::int64_t> remap(ncols_, -1);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (remap.at(cols[k]) >= 0) throw std::invalid_argument("submatrix: repeated column");
      remap[cols[k]] = static_cast<std::int64_t>(k);
    }
    std::vector<std::uint32_t> rr, cc, vv;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      std::vector<std::pair<std::uint32_t, std::uint32_t>> row;
      auto rc = row_cols(rows[k]);
      auto rv = row_vals(rows[k]);
      for (std::size_t j = 0; j < rc.size(); ++j)
        if (remap[rc[j]] >= 0) row.push_back({static_cast<std::uint32_t>(remap[rc[j]]), rv[j]});
      std::sort(row.begin(), row.end());
      for (auto& [c, v] : row) {
        rr.push_back(static_cast<std::uint32_t>(k));
        cc.push_back(c);
        vv.push_back(v);
      }
    }
    RatMatrix out = from_sorted(rows.size(), cols.size(), rr, std::move(cc), std::move(vv), pool_);
    for (std::size_t k = 0; k < rows.size(); ++k) out.source_rows_[k] = source_rows_[rows[k]];
    for (std::size_t k = 0; k < cols.size(); ++k) out.source_cols_[k] = source_cols_[cols[k]];
    return out;
  }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> out;
    out.reserve(nnz());
    for (std::size_t r = 0; r < nrows_; ++r) {
      auto rc = row_cols(r);
      auto rv = row_vals(r);
      for (std::size_t j = 0; j < rc.size(); ++j) out.push_back({static_cast<std::uint32_t>(r), rc[j], value(rv[j])});
    }
    return out;
  }

 private:
  void build_csc() {
    col_ptr_.assign(ncols_ + 1, 0);
    for (auto c : col_idx_) ++col_ptr_[c + 1];
    std::partial_sum(col_ptr_.begin(), col_ptr_.end(), col_ptr_.begin());
    row_idx_.resize(col_idx_.size());
    std::vector<std::uint64_t> fill(col_ptr_.begin(), col_ptr_.end() - 1);
    for (std::size_t r = 0; r < nrows_; ++r)
      for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) row_idx_[fill[col_idx_[k]]++] = static_cast<std::uint32_t>(r);
  }

  std::size_t nrows_ = 0, ncols_ = 0;
  std::vector<std::uint64_t> row_ptr_{0};
  std::vector<std::uint32_t> col_idx_, val_idx_;
  std::vector<std::uint64_t> col_ptr_{0};
  std::vector<std::uint32_t> row_idx_;
  std::vector<std::uint32_t> source_rows_, source_cols_;
  std::shared_ptr<const std::vector<Rational>> pool_ = std::make_shared<const std::vector<Rational>>();
};

inline void write_matrix_market(std::ostream& out, const RatMatrix& m) {
  out << "%%MatrixMarket matrix coordinate rational general\n";
  out << m.nrows() << ' ' << m.ncols() << ' ' << m.nnz() << '\n';
  for (std::size_t r = 0; r < m.nrows(); ++r) {
    auto rc = m.row_cols(r);
    auto rv = m.row_vals(r);
    for (std::size_t j = 0; j < rc.size(); ++j)
      out << r + 1 << ' ' << rc[j] + 1 << ' ' << to_fraction_string(m.value(rv[j])) << '\n';
  }
}

/// Coordinate format only; "pattern" entries read as 1, values as exact rationals.
inline RatMatrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0)
    throw std::runtime_error("matrix market: missing banner");
  const bool pattern = line.find("pattern") != std::string::npos;
  if (line.find("coordinate") == std::string::npos) throw std::runtime_error("matrix market: only coordinate format");
  while (std::getline(in, line) && (line.empty() || line[0] == '%')) {
  }
  std::size_t nr = 0, nc = 0, nnz = 0;
  {
    std::istringstream h(line);
    if (!(h >> nr >> nc >> nnz)) throw std::runtime_error("matrix market: malformed size line");
  }
  std::vector<Triplet> t;
  t.reserve(nnz);
  for (std::size_t k = 0; k < nnz; ++k) {
    if (!std::getline(in, line)) throw std::runtime_error("matrix market: truncated");
    std::istringstream l(line);
    std::uint32_t r = 0, c = 0;
    std::string v;
    l >> r >> c;
    if (!pattern) l >> v;
    if (r == 0 || c == 0 || r > nr || c > nc) throw std::runtime_error("matrix market: index out of range");
    t.push_back({r - 1, c - 1, pattern ? Rational(1) : parse_rational(v)});
  }
  return RatMatrix::from_triplets(nr, nc, std::move(t));
}

// ---------------------------------------------------------------------------
// Evaluation

inline auto make_evaluator(const Point& point, const DerivationParams&, const Poly*) {
  return [point](const Poly& p) { return evaluate(p, point); };
}
inline auto make_evaluator(const Point& point, const DerivationParams& params, const JetCoeff*) {
  return JetEvaluator(point, params);
}

struct EvaluatedMatrix {
  RatMatrix matrix;
  // Positions (row, col) nonzero as polynomials but zero at the point, row-major.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> theta_minus_theta0;
  std::size_t theta_size = 0;
};

template <DifferentialCoefficient Coeff>
EvaluatedMatrix evaluate_matrix(const PolyMatrix<Coeff>& pm, const Point& point, const DerivationParams& params = {}) {
  auto eval = make_evaluator(point, params, static_cast<const Coeff*>(nullptr));
  auto values = std::make_shared<std::vector<Rational>>();
  values->reserve(pm.pool().size());
  for (const auto& c : pm.pool()) values->push_back(eval(c));
  EvaluatedMatrix out;
  std::vector<std::uint32_t> rows, cols, vals;
  for (std::size_t r = 0; r < pm.nrows(); ++r) {
    for (const auto& e : pm.row(r)) {
      if ((*values)[e.coeff] == 0) {
        out.theta_minus_theta0.push_back({static_cast<std::uint32_t>(r), e.col});
      } else {
        rows.push_back(static_cast<std::uint32_t>(r));
        cols.push_back(e.col);
        vals.push_back(e.coeff);
      }
    }
  }
  out.theta_size = pm.nnz();
  out.matrix = RatMatrix::from_sorted(pm.nrows(), pm.ncols(), rows, std::move(cols), std::move(vals), values);
  return out;
}

struct NullColumns {
  std::size_t count = 0;
  std::vector<std::uint32_t> indices;
  bool all_symbolically_null = true;
};

/// Columns of rm without entries; flags whether each is also empty in pm.
template <DifferentialCoefficient Coeff>
NullColumns null_columns(const PolyMatrix<Coeff>& pm, const RatMatrix& rm) {
  std::vector<bool> symbolic(pm.ncols(), false);
  for (std::size_t r = 0; r < pm.nrows(); ++r)
    for (const auto& e : pm.row(r)) symbolic[e.col] = true;
  NullColumns out;
  for (std::uint32_t c = 0; c < rm.ncols(); ++c) {
    if (rm.col_count(c) != 0) continue;
    out.indices.push_back(c);
    if (symbolic[rm.source_cols()[c]]) out.all_symbolically_null = false;
  }
  out.count = out.indices.size();
  return out;
}

// ---------------------------------------------------------------------------
// Maximum matching

struct Matching {
  std::vector<std::int32_t> row_to_col, col_to_row;  // -1 = unmatched
  std::size_t size = 0;
};

/// Hopcroft-Karp on the nonzero pattern. Columns are scanned in ascending order.
inline Matching hopcroft_karp(const RatMatrix& m) {
  const std::size_t nr = m.nrows(), nc = m.ncols();
  Matching mt;
  mt.row_to_col.assign(nr, -1);
  mt.col_to_row.assign(nc, -1);
  for (std::size_t r = 0; r < nr; ++r) {  // cheap greedy start
    for (auto c : m.row_cols(r)) {
      if (mt.col_to_row[c] < 0) {
        mt.col_to_row[c] = static_cast<std::int32_t>(r);
        mt.row_to_col[r] = static_cast<std::int32_t>(c);
        ++mt.size;
        break;
      }
    }
  }
  constexpr std::int32_t kInf = std::numeric_limits<std::int32_t>::max();
  std::vector<std::int32_t> dist(nr);
  std::vector<std::uint32_t> queue;
  std::vector<std::size_t> cursor(nr);
  std::vector<std::uint32_t> stack, via;
  for (;;) {
    queue.clear();
    for (std::size_t r = 0; r < nr; ++r) {
      if (mt.row_to_col[r] < 0) {
        dist[r] = 0;
        queue.push_back(static_cast<std::uint32_t>(r));
      } else {
        dist[r] = kInf;
      }
    }
    bool found = false;
    for (std::size_t h = 0; h < queue.size(); ++h) {
      const auto u = queue[h];
      for (auto c : m.row_cols(u)) {
        const auto w = mt.col_to_row[c];
        if (w < 0) {
          found = true;
        } else if (dist[w] == kInf) {
          dist[w] = dist[u] + 1;
          queue.push_back(static_cast<std::uint32_t>(w));
        }
      }
    }
    if (!found) break;
    for (std::size_t r = 0; r < nr; ++r) cursor[r] = 0;
    for (std::size_t root = 0; root < nr; ++root) {
      if (mt.row_to_col[root] >= 0) continue;
      stack.assign(1, static_cast<std::uint32_t>(root));
      via.clear();
      while (!stack.empty()) {
        const auto x = stack.back();
        auto cols = m.row_cols(x);
        if (cursor[x] == cols.size()) {
          dist[x] = kInf;
          stack.pop_back();
          if (!via.empty()) via.pop_back();
          continue;
        }
        const auto c = cols[cursor[x]++];
        const auto w = mt.col_to_row[c];
        if (w < 0) {
          via.push_back(c);
          for (std::size_t k = 0; k < stack.size(); ++k) {
            mt.row_to_col[stack[k]] = static_cast<std::int32_t>(via[k]);
            mt.col_to_row[via[k]] = static_cast<std::int32_t>(stack[k]);
          }
          ++mt.size;
          break;
        }
        if (dist[w] == dist[x] + 1) {
          via.push_back(c);
          stack.push_back(static_cast<std::uint32_t>(w));
        }
      }
    }
  }
  return mt;
}

inline std::size_t sprank(const RatMatrix& m) { return hopcroft_karp(m).size; }

/// Depth-first augmenting paths with a cheap-assignment pass, started from each
/// column in turn (from each row when rows are fewer). This is the classical
/// maxtrans scheme used by the usual sparse packages; the maximum matching it
/// picks, and so the rows kept in the overdetermined block, differ from
/// Hopcroft-Karp's.
inline Matching maxtrans_dfs(const RatMatrix& m) {
  const std::size_t nr = m.nrows(), nc = m.ncols();
  std::size_t nonempty_rows = 0, nonempty_cols = 0;
  for (std::size_t r = 0; r < nr; ++r) nonempty_rows += !m.row_cols(r).empty();
  for (std::size_t c = 0; c < nc; ++c) nonempty_cols += m.col_count(c) != 0;
  // Search from the side with fewer nonempty lines. "start" nodes own adjacency lists into "target" nodes.
  const bool from_rows = nonempty_rows < nonempty_cols;
  const std::size_t ns = from_rows ? nr : nc, nt = from_rows ? nc : nr;
  auto adj = [&](std::size_t j) { return from_rows ? m.row_cols(j) : m.col_rows(j); };

  std::vector<std::int64_t> match_t(nt, -1);  // target -> start
  std::vector<std::size_t> cheap(ns, 0), ps(ns);
  std::vector<std::int64_t> mark(ns, -1), js(ns), is(ns);
  for (std::size_t k = 0; k < ns; ++k) {
    bool found = false;
    std::int64_t head = 0, i = -1;
    js[0] = static_cast<std::int64_t>(k);
    while (head >= 0) {
      const auto j = static_cast<std::size_t>(js[head]);
      const auto a = adj(j);
      if (mark[j] != static_cast<std::int64_t>(k)) {
        mark[j] = static_cast<std::int64_t>(k);
        std::size_t p = cheap[j];
        for (; p < a.size() && !found; ++p) {
          i = a[p];
          found = match_t[i] == -1;
        }
        cheap[j] = p;
        if (found) {
          is[head] = i;
          break;
        }
        ps[j] = 0;
      }
      std::size_t p = ps[j];
      for (; p < a.size(); ++p) {
        i = a[p];
        if (mark[match_t[i]] == static_cast<std::int64_t>(k)) continue;
        ps[j] = p + 1;
        is[head] = i;
        js[++head] = match_t[i];
        break;
      }
      if (p == a.size()) --head;
    }
    if (found)
      for (auto h = head; h >= 0; --h) match_t[is[h]] = js[h];
  }
  Matching mt;
  mt.row_to_col.assign(nr, -1);
  mt.col_to_row.assign(nc, -1);
  for (std::size_t t = 0; t < nt; ++t) {
    if (match_t[t] < 0) continue;
    const auto r = from_rows ? match_t[t] : static_cast<std::int64_t>(t);
    const auto c = from_rows ? static_cast<std::int64_t>(t) : match_t[t];
    mt.row_to_col[r] = static_cast<std::int32_t>(c);
    mt.col_to_row[c] = static_cast<std::int32_t>(r);
    ++mt.size;
  }
  return mt;
}

/// True iff mt is a matching on m's pattern admitting no augmenting path.
inline bool is_maximum_matching(const RatMatrix& m, const Matching& mt) {
  std::size_t count = 0;
  for (std::size_t r = 0; r < m.nrows(); ++r) {
    const auto c = mt.row_to_col[r];
    if (c < 0) continue;
    ++count;
    if (mt.col_to_row[c] != static_cast<std::int32_t>(r)) return false;
    auto cols = m.row_cols(r);
    if (!std::binary_search(cols.begin(), cols.end(), static_cast<std::uint32_t>(c))) return false;
  }
  if (count != mt.size) return false;
  // Alternating BFS from free rows; reaching a free column means an augmenting path.
  std::vector<bool> seen_row(m.nrows(), false), seen_col(m.ncols(), false);
  std::vector<std::uint32_t> q;
  for (std::size_t r = 0; r < m.nrows(); ++r)
    if (mt.row_to_col[r] < 0) {
      seen_row[r] = true;
      q.push_back(static_cast<std::uint32_t>(r));
    }
  for (std::size_t h = 0; h < q.size(); ++h) {
    for (auto c : m.row_cols(q[h])) {
      if (seen_col[c]) continue;
      seen_col[c] = true;
      const auto w = mt.col_to_row[c];
      if (w < 0) return false;
      if (!seen_row[w]) {
        seen_row[w] = true;
        q.push_back(static_cast<std::uint32_t>(w));
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Dulmage-Mendelsohn
//
// After permutation the matrix has the coarse staircase
//
//              C_under  C_square  C_over
//   R_under  [  A11      A12       A13  ]
//   R_square [   0       A22       A23  ]
//   R_over   [   0        0        A33  ]
//
// R_under/C_under: reachable by alternating paths from unmatched columns
// (more columns than rows). R_over/C_over: reachable from unmatched rows
// (more rows than columns). A22 is square with a perfect matching and is
// refined into upper block-triangular fine blocks.

struct BlockRange {
  std::size_t row_begin = 0, row_end = 0, col_begin = 0, col_end = 0;
  std::size_t rows() const { return row_end - row_begin; }
  std::size_t cols() const { return col_end - col_begin; }
};

struct DmResult {
  std::vector<std::uint32_t> row_perm, col_perm;  // new position -> original index
  // Coarse boundaries in permuted coordinates: [0, b1) under, [b1, b2) square, [b2, b3) over.
  std::array<std::size_t, 4> row_bounds{}, col_bounds{};
  std::size_t over_matched_rows = 0;  // R_over starts with its matched rows, aligned with C_over
  std::vector<BlockRange> fine_blocks;  // diagonal blocks of A22, upper triangular order
  Matching matching;

  BlockRange under() const { return {row_bounds[0], row_bounds[1], col_bounds[0], col_bounds[1]}; }
  BlockRange square() const { return {row_bounds[1], row_bounds[2], col_bounds[1], col_bounds[2]}; }
  BlockRange over() const { return {row_bounds[2], row_bounds[3], col_bounds[2], col_bounds[3]}; }
  /// The matched square part of the overdetermined block.
  BlockRange over_square() const {
    return {row_bounds[2], row_bounds[2] + over_matched_rows, col_bounds[2], col_bounds[3]};
  }
  std::vector<std::uint32_t> rows_of(const BlockRange& b) const {
    return {row_perm.begin() + static_cast<std::ptrdiff_t>(b.row_begin),
            row_perm.begin() + static_cast<std::ptrdiff_t>(b.row_end)};
  }
  std::vector<std::uint32_t> cols_of(const BlockRange& b) const {
    return {col_perm.begin() + static_cast<std::ptrdiff_t>(b.col_begin),
            col_perm.begin() + static_cast<std::ptrdiff_t>(b.col_end)};
  }
};

namespace detail {

/// Strongly connected components of the graph on nodes 0..n-1, iterative Tarjan.
/// Returns the component id of every node; ids are in reverse topological order.
inline std::vector<std::uint32_t> tarjan_scc(std::size_t n, const std::vector<std::vector<std::uint32_t>>& adj,
                                             std::size_t& ncomp) {
  constexpr std::uint32_t kUnset = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> index(n, kUnset), low(n, 0), comp(n, kUnset);
  std::vector<std::uint32_t> stack;
  std::vector<bool> on_stack(n, false);
  std::vector<std::pair<std::uint32_t, std::size_t>> call;
  std::uint32_t counter = 0;
  ncomp = 0;
  for (std::uint32_t s = 0; s < n; ++s) {
    if (index[s] != kUnset) continue;
    call.push_back({s, 0});
    while (!call.empty()) {
      auto& [v, next] = call.back();
      if (next == 0 && index[v] == kUnset) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
      }
      if (next < adj[v].size()) {
        const auto w = adj[v][next++];
        if (index[w] == kUnset) {
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        std::uint32_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = static_cast<std::uint32_t>(ncomp);
        } while (w != v);
        ++ncomp;
      }
      const auto finished = v;
      call.pop_back();
      if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[finished]);
    }
  }
  return comp;
}

}  // namespace detail

enum class MatchingMethod { hopcroft_karp, maxtrans_dfs };

inline const char* name_of(MatchingMethod m) { return m == MatchingMethod::hopcroft_karp ? "hk" : "dfs"; }

inline DmResult dm_decompose(const RatMatrix& m, MatchingMethod method = MatchingMethod::hopcroft_karp) {
  DmResult dm;
  dm.matching = method == MatchingMethod::hopcroft_karp ? hopcroft_karp(m) : maxtrans_dfs(m);
  const auto& mt = dm.matching;
  const std::size_t nr = m.nrows(), nc = m.ncols();

  // Overdetermined: alternating reach from unmatched rows.
  std::vector<bool> over_row(nr, false), over_col(nc, false);
  std::vector<std::uint32_t> q;
  for (std::size_t r = 0; r < nr; ++r)
    if (mt.row_to_col[r] < 0) {
      over_row[r] = true;
      q.push_back(static_cast<std::uint32_t>(r));
    }
  for (std::size_t h = 0; h < q.size(); ++h)
    for (auto c : m.row_cols(q[h])) {
      if (over_col[c]) continue;
      over_col[c] = true;
      const auto w = mt.col_to_row[c];
      if (w >= 0 && !over_row[w]) {
        over_row[w] = true;
        q.push_back(static_cast<std::uint32_t>(w));
      }
    }
  // Underdetermined: alternating reach from unmatched columns.
  std::vector<bool> under_row(nr, false), under_col(nc, false);
  q.clear();
  for (std::size_t c = 0; c < nc; ++c)
    if (mt.col_to_row[c] < 0) {
      under_col[c] = true;
      q.push_back(static_cast<std::uint32_t>(c));
    }
  for (std::size_t h = 0; h < q.size(); ++h)
    for (auto r : m.col_rows(q[h])) {
      if (under_row[r]) continue;
      under_row[r] = true;
      const auto w = mt.row_to_col[r];
      if (w >= 0 && !under_col[w]) {
        under_col[w] = true;
        q.push_back(static_cast<std::uint32_t>(w));
      }
    }

  // Under part: matched columns with their rows first, then free columns.
  for (std::uint32_t c = 0; c < nc; ++c)
    if (under_col[c] && mt.col_to_row[c] >= 0) {
      dm.col_perm.push_back(c);
      dm.row_perm.push_back(static_cast<std::uint32_t>(mt.col_to_row[c]));
    }
  for (std::uint32_t c = 0; c < nc; ++c)
    if (under_col[c] && mt.col_to_row[c] < 0) dm.col_perm.push_back(c);
  dm.row_bounds[1] = dm.row_perm.size();
  dm.col_bounds[1] = dm.col_perm.size();

  // Square part, refined by strongly connected components.
  std::vector<std::uint32_t> sq_cols;
  for (std::uint32_t c = 0; c < nc; ++c)
    if (!under_col[c] && !over_col[c]) sq_cols.push_back(c);
  {
    std::vector<std::int64_t> local(nc, -1);
    for (std::size_t k = 0; k < sq_cols.size(); ++k) local[sq_cols[k]] = static_cast<std::int64_t>(k);
    std::vector<std::vector<std::uint32_t>> adj(sq_cols.size());
    for (std::size_t k = 0; k < sq_cols.size(); ++k) {
      const auto r = mt.col_to_row[sq_cols[k]];
      for (auto c : m.row_cols(r))
        if (local[c] >= 0 && local[c] != static_cast<std::int64_t>(k)) adj[k].push_back(static_cast<std::uint32_t>(local[c]));
    }
    std::size_t ncomp = 0;
    auto comp = detail::tarjan_scc(sq_cols.size(), adj, ncomp);
    std::vector<std::vector<std::uint32_t>> members(ncomp);
    for (std::size_t k = 0; k < sq_cols.size(); ++k) members[comp[k]].push_back(sq_cols[k]);
    // Condensation edges point from a block to blocks that must come after it.
    std::vector<std::vector<std::uint32_t>> succ(ncomp);
    std::vector<std::size_t> indeg(ncomp, 0);
    for (std::size_t k = 0; k < sq_cols.size(); ++k)
      for (auto j : adj[k])
        if (comp[j] != comp[k]) succ[comp[k]].push_back(comp[j]);
    for (auto& s : succ) {
      std::sort(s.begin(), s.end());
      s.erase(std::unique(s.begin(), s.end()), s.end());
      for (auto t : s) ++indeg[t];
    }
    // The largest sink (ties: smallest column) is held back to be the last block.
    std::int64_t held = -1;
    for (std::size_t b = 0; b < ncomp; ++b) {
      if (!succ[b].empty()) continue;
      if (held < 0 || members[b].size() > members[held].size() ||
          (members[b].size() == members[held].size() && members[b].front() < members[held].front()))
        held = static_cast<std::int64_t>(b);
    }
    using Item = std::pair<std::uint32_t, std::uint32_t>;  // (smallest column, block)
    std::priority_queue<Item, std::vector<Item>, std::greater<>> ready;
    for (std::size_t b = 0; b < ncomp; ++b)
      if (indeg[b] == 0 && static_cast<std::int64_t>(b) != held)
        ready.push({members[b].front(), static_cast<std::uint32_t>(b)});
    std::vector<std::uint32_t> order;
    bool held_ready = held >= 0 && indeg[held] == 0;
    while (!ready.empty() || held_ready) {
      std::uint32_t b;
      if (!ready.empty()) {
        b = ready.top().second;
        ready.pop();
      } else {
        b = static_cast<std::uint32_t>(held);
        held_ready = false;
      }
      order.push_back(b);
      for (auto t : succ[b]) {
        if (--indeg[t] != 0) continue;
        if (static_cast<std::int64_t>(t) == held)
          held_ready = true;
        else
          ready.push({members[t].front(), t});
      }
    }
    if (order.size() != ncomp) throw std::logic_error("dm_decompose: condensation is not acyclic");
    for (auto b : order) {
      BlockRange br{dm.row_perm.size(), 0, dm.col_perm.size(), 0};
      for (auto c : members[b]) {
        dm.col_perm.push_back(c);
        dm.row_perm.push_back(static_cast<std::uint32_t>(mt.col_to_row[c]));
      }
      br.row_end = dm.row_perm.size();
      br.col_end = dm.col_perm.size();
      dm.fine_blocks.push_back(br);
    }
  }
  dm.row_bounds[2] = dm.row_perm.size();
  dm.col_bounds[2] = dm.col_perm.size();

  for (std::uint32_t c = 0; c < nc; ++c)
    if (over_col[c]) {
      dm.col_perm.push_back(c);
      dm.row_perm.push_back(static_cast<std::uint32_t>(mt.col_to_row[c]));
    }
  dm.over_matched_rows = dm.row_perm.size() - dm.row_bounds[2];
  for (std::uint32_t r = 0; r < nr; ++r)
    if (mt.row_to_col[r] < 0) dm.row_perm.push_back(r);
  dm.row_bounds[3] = dm.row_perm.size();
  dm.col_bounds[3] = dm.col_perm.size();
  if (dm.row_bounds[3] != nr || dm.col_bounds[3] != nc) throw std::logic_error("dm_decompose: incomplete permutation");
  return dm;
}

/// Checks the coarse staircase and the fine upper block-triangular form of the square part.
inline bool dm_staircase_valid(const RatMatrix& m, const DmResult& dm) {
  std::vector<std::size_t> row_pos(m.nrows()), col_pos(m.ncols());
  for (std::size_t k = 0; k < dm.row_perm.size(); ++k) row_pos[dm.row_perm[k]] = k;
  for (std::size_t k = 0; k < dm.col_perm.size(); ++k) col_pos[dm.col_perm[k]] = k;
  auto coarse = [](const std::array<std::size_t, 4>& b, std::size_t p) {
    return p < b[1] ? 0 : p < b[2] ? 1 : 2;
  };
  std::vector<std::size_t> fine_of_col(m.ncols(), 0), fine_of_row(m.nrows(), 0);
  for (std::size_t b = 0; b < dm.fine_blocks.size(); ++b) {
    const auto& fb = dm.fine_blocks[b];
    for (auto p = fb.col_begin; p < fb.col_end; ++p) fine_of_col[dm.col_perm[p]] = b;
    for (auto p = fb.row_begin; p < fb.row_end; ++p) fine_of_row[dm.row_perm[p]] = b;
  }
  for (std::size_t r = 0; r < m.nrows(); ++r) {
    const int rc = coarse(dm.row_bounds, row_pos[r]);
    for (auto c : m.row_cols(r)) {
      const int cc = coarse(dm.col_bounds, col_pos[c]);
      if (cc < rc) return false;
      if (rc == 1 && cc == 1 && fine_of_col[c] < fine_of_row[r]) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// (P 0; Q R) partition

struct RobustnessViolation {
  std::uint32_t row, col;  // indices in the symbolic matrix
  bool vanishes_at_point;  // true for a position of Theta \ Theta0
};

struct PqrPartition {
  std::vector<std::uint32_t> p_rows, p_cols;  // in the symbolic matrix, P's order
  std::vector<std::uint32_t> q_rows, r_cols;
  std::size_t zero_block_rows = 0, zero_block_cols = 0;
  std::vector<RobustnessViolation> violations;
  std::size_t theta_entries_in_p_rows = 0;
  bool robust() const { return violations.empty(); }
};

/// Takes P's rows and columns (indices into pm) and checks that the symbolic
/// entries of those rows all fall into P's columns.
template <DifferentialCoefficient Coeff>
PqrPartition extract_pqr(const PolyMatrix<Coeff>& pm, const RatMatrix& evaluated, std::vector<std::uint32_t> p_rows,
                         std::vector<std::uint32_t> p_cols) {
  PqrPartition out;
  out.p_rows = std::move(p_rows);
  out.p_cols = std::move(p_cols);
  std::vector<bool> in_p_row(pm.nrows(), false), in_p_col(pm.ncols(), false);
  for (auto r : out.p_rows) in_p_row.at(r) = true;
  for (auto c : out.p_cols) in_p_col.at(c) = true;
  for (std::uint32_t r = 0; r < pm.nrows(); ++r)
    if (!in_p_row[r]) out.q_rows.push_back(r);
  for (std::uint32_t c = 0; c < pm.ncols(); ++c)
    if (!in_p_col[c]) out.r_cols.push_back(c);
  out.zero_block_rows = out.p_rows.size();
  out.zero_block_cols = out.r_cols.size();
  for (auto r : out.p_rows) {
    for (const auto& e : pm.row(r)) {
      ++out.theta_entries_in_p_rows;
      if (in_p_col[e.col]) continue;
      auto cols = evaluated.row_cols(r);
      const bool nonzero_at_point = std::binary_search(cols.begin(), cols.end(), e.col);
      out.violations.push_back({r, e.col, !nonzero_at_point});
    }
  }
  return out;
}

struct TargetColumns {
  bool all_inside = false;
  std::array<std::int64_t, 6> positions{};  // 1-based within P, -1 when absent
};

/// Positions of d1 z1, d2 z1, d3 z1, d1 z2, d2 z2, d3 z2 among P's columns,
/// with P's columns taken in (unknown, index_of(deriv)) order.
inline TargetColumns target_column_check(const PqrPartition& part, const std::vector<ColId>& col_ids) {
  std::vector<ColId> cols;
  for (auto c : part.p_cols) cols.push_back(col_ids.at(c));
  auto natural_less = [](const ColId& a, const ColId& b) {
    if (a.unknown != b.unknown) return a.unknown < b.unknown;
    return index_of(a.deriv) < index_of(b.deriv);
  };
  std::sort(cols.begin(), cols.end(), natural_less);
  TargetColumns out;
  out.all_inside = true;
  std::size_t k = 0;
  for (auto u : {UnknownId::z1, UnknownId::z2})
    for (int axis = 1; axis <= 3; ++axis, ++k) {
      const ColId target{u, MultiIndex{}.bumped(axis)};
      auto it = std::lower_bound(cols.begin(), cols.end(), target, natural_less);
      if (it != cols.end() && *it == target) {
        out.positions[k] = (it - cols.begin()) + 1;
      } else {
        out.positions[k] = -1;
        out.all_inside = false;
      }
    }
  return out;
}

}  // namespace algsolv
