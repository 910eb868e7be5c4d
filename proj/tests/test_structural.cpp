#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "support.hpp"

using namespace algsolv;
using testsupport::Gen;

namespace {

RatMatrix from_pattern(const std::vector<std::string>& rows) {
  std::vector<Triplet> t;
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      if (rows[r][c] != '.') t.push_back({std::uint32_t(r), std::uint32_t(c), Rational(rows[r][c] - '0')});
  return RatMatrix::from_triplets(rows.size(), rows.empty() ? 0 : rows[0].size(), std::move(t));
}

RatMatrix identity(std::size_t n) {
  std::vector<Triplet> t;
  for (std::uint32_t i = 0; i < n; ++i) t.push_back({i, i, Rational(1)});
  return RatMatrix::from_triplets(n, n, std::move(t));
}

}  // namespace

TEST_CASE("RatMatrix keeps CSR and CSC consistent", "[structural]") {
  Gen g(21);
  for (int k = 0; k < 50; ++k) {
    const auto m = g.matrix(g.uniform(1, 15), g.uniform(1, 15), 0.3);
    std::size_t via_cols = 0;
    for (std::size_t c = 0; c < m.ncols(); ++c) {
      for (auto r : m.col_rows(c)) CHECK(m.at(r, c) != 0);
      via_cols += m.col_count(c);
    }
    CHECK(via_cols == m.nnz());
  }
}

TEST_CASE("submatrix provenance composes", "[structural]") {
  const auto m = from_pattern({"12.", ".34", "5.6"});
  const auto a = m.submatrix({2, 0}, {2, 0});
  CHECK(a.at(0, 0) == 6);
  CHECK(a.at(0, 1) == 5);
  CHECK(a.at(1, 1) == 1);
  const auto b = a.submatrix({1}, {1});
  CHECK(b.source_rows()[0] == 0);
  CHECK(b.source_cols()[0] == 0);
  CHECK_THROWS(m.submatrix({0}, {1, 1}));
}

TEST_CASE("Matrix Market text round-trips", "[structural]") {
  Gen g(22);
  const auto m = g.matrix(7, 9, 0.4);
  std::ostringstream out;
  write_matrix_market(out, m);
  std::istringstream in(out.str());
  const auto back = read_matrix_market(in);
  CHECK(back.triplets().size() == m.triplets().size());
  for (std::size_t r = 0; r < m.nrows(); ++r)
    for (std::size_t c = 0; c < m.ncols(); ++c) CHECK(back.at(r, c) == m.at(r, c));
  std::istringstream bad("not a banner\n");
  CHECK_THROWS(read_matrix_market(bad));
}

TEST_CASE("sprank of simple shapes", "[structural]") {
  CHECK(sprank(identity(9)) == 9);
  CHECK(sprank(from_pattern({"11", "11", "11"})) == 2);
  CHECK(sprank(from_pattern({"1..", "1..", "1.."})) == 1);
  CHECK(sprank(RatMatrix::from_triplets(3, 4, {})) == 0);
}

TEST_CASE("Hopcroft-Karp returns a maximum matching", "[structural]") {
  Gen g(23);
  for (int k = 0; k < 200; ++k) {
    const auto m = g.matrix(g.uniform(1, 30), g.uniform(1, 30), g.uniform(2, 30) / 100.0);
    const auto mt = hopcroft_karp(m);
    CHECK(is_maximum_matching(m, mt));
  }
}

TEST_CASE("null columns distinguish vanishing-at-point from symbolic zero", "[structural]") {
  // column 0: E * X1 (vanishes at e = 0 only), column 1: 1, column 2: empty
  std::vector<RowId> rows{{1, MultiIndex{}}};
  std::vector<ColId> cols{{UnknownId::z1, MultiIndex{}}, {UnknownId::z1, {0, 1, 0, 0}}, {UnknownId::z2, MultiIndex{}}};
  PolyMatrix<Poly>::Builder b(rows, cols);
  b.set_row(0, {{0, Poly::var(Var::E) * Poly::var(Var::X1)}, {1, Poly(1)}}, {});
  const auto pm = std::move(b).finish();
  const Point at{Rational(0), Rational(1), Rational(2), Rational(3), Rational(4)};
  const auto ev = evaluate_matrix(pm, at);
  const auto nc = null_columns(pm, ev.matrix);
  CHECK(nc.count == 2);
  CHECK_FALSE(nc.all_symbolically_null);
  CHECK(ev.theta_minus_theta0.size() == 1);
  CHECK(null_columns(pm, evaluate_matrix(pm, {Rational(1), Rational(1), Rational(2), Rational(3), Rational(4)}).matrix)
            .all_symbolically_null);

  const auto id = evaluate_matrix(pm.select({0}, {1}), at);
  CHECK(null_columns(pm.select({0}, {1}), id.matrix).count == 0);
}

TEST_CASE("DM on a permuted diagonal gives one block per entry", "[structural]") {
  const auto m = from_pattern({"..1.", "1...", "...1", ".1.."});
  const auto dm = dm_decompose(m);
  CHECK(dm.under().rows() == 0);
  CHECK(dm.over().rows() == 0);
  CHECK(dm.square().rows() == 4);
  CHECK(dm.fine_blocks.size() == 4);
  for (const auto& b : dm.fine_blocks) CHECK(b.rows() == 1);
  CHECK(dm_staircase_valid(m, dm));
}

TEST_CASE("DM separates under-, well- and overdetermined parts", "[structural]") {
  // rows 0-1 touch columns 0-2 (underdetermined); row 2 / col 3 square; rows 3-5 on cols 4-5 (over)
  const auto m = from_pattern({"111...", "11....", "...1..", "....1.", ".....1", "....11"});
  const auto dm = dm_decompose(m);
  CHECK(dm.under().rows() == 2);
  CHECK(dm.under().cols() == 3);
  CHECK(dm.square().rows() == 1);
  CHECK(dm.over().rows() == 3);
  CHECK(dm.over().cols() == 2);
  CHECK(dm.over_square().rows() == 2);
  CHECK(dm.matching.size == 5);
  CHECK(dm_staircase_valid(m, dm));
}

TEST_CASE("fine blocks: the largest sink comes last, upper triangular", "[structural]") {
  // 3x3 cycle block feeding nothing, and a 1x1 block that depends on it
  const auto m = from_pattern({"11..", ".11.", "1.1.", "1..1"});
  const auto dm = dm_decompose(m);
  REQUIRE(dm.fine_blocks.size() == 2);
  CHECK(dm.fine_blocks.back().rows() == 3);
  CHECK(dm_staircase_valid(m, dm));
}

TEST_CASE("PQR partition: clean split and planted violation", "[structural]") {
  std::vector<RowId> rows{{1, MultiIndex{}}, {1, {0, 1, 0, 0}}};
  std::vector<ColId> cols{{UnknownId::z1, MultiIndex{}}, {UnknownId::z2, MultiIndex{}}};
  const Point at{Rational(0), Rational(1), Rational(1), Rational(1), Rational(1)};

  PolyMatrix<Poly>::Builder clean(rows, cols);
  clean.set_row(0, {{0, Poly(1)}}, {});
  clean.set_row(1, {{1, Poly(2)}}, {});
  const auto pm = std::move(clean).finish();
  const auto ev = evaluate_matrix(pm, at);
  const auto ok = extract_pqr(pm, ev.matrix, {0}, {0});
  CHECK(ok.robust());
  CHECK(ok.zero_block_rows == 1);
  CHECK(ok.zero_block_cols == 1);

  // an entry E * x1 in P's row, outside P's columns: zero at the point, nonzero symbolically
  PolyMatrix<Poly>::Builder planted(rows, cols);
  planted.set_row(0, {{0, Poly(1)}, {1, Poly::var(Var::E) * Poly::var(Var::X1)}}, {});
  planted.set_row(1, {{1, Poly(2)}}, {});
  const auto pm2 = std::move(planted).finish();
  const auto ev2 = evaluate_matrix(pm2, at);
  const auto bad = extract_pqr(pm2, ev2.matrix, {0}, {0});
  CHECK_FALSE(bad.robust());
  REQUIRE(bad.violations.size() == 1);
  CHECK(bad.violations[0].vanishes_at_point);
}

TEST_CASE("target column positions", "[structural]") {
  const ColumnLayout layout(4);
  const auto ids = layout.ids();
  PqrPartition part;
  for (std::uint32_t c = 0; c < ids.size(); ++c) part.p_cols.push_back(c);
  auto t = target_column_check(part, ids);
  CHECK(t.all_inside);
  // P's columns in natural order: z1 (no derivative), d1 z1, d2 z1, d3 z1, ...
  CHECK(t.positions[0] == 2);
  CHECK(t.positions[3] == static_cast<std::int64_t>(count_F(4)) + 2);

  part.p_cols.erase(part.p_cols.begin());  // drop d1 z1
  t = target_column_check(part, ids);
  CHECK_FALSE(t.all_inside);
  CHECK(t.positions[0] == -1);
  CHECK(target_column_check(part, ids).positions == t.positions);
}

TEST_CASE("DFS matching is maximum and the coarse sizes do not depend on the matching", "[structural]") {
  Gen g(24);
  for (int k = 0; k < 300; ++k) {
    const auto m = g.matrix(g.uniform(1, 40), g.uniform(1, 40), g.uniform(2, 25) / 100.0);
    const auto mt = maxtrans_dfs(m);
    REQUIRE(is_maximum_matching(m, mt));
    const auto a = dm_decompose(m, MatchingMethod::hopcroft_karp);
    const auto b = dm_decompose(m, MatchingMethod::maxtrans_dfs);
    CHECK(a.row_bounds == b.row_bounds);
    CHECK(a.col_bounds == b.col_bounds);
    CHECK(a.fine_blocks.size() == b.fine_blocks.size());
    CHECK(dm_staircase_valid(m, b));
  }
}

TEST_CASE("DFS matching takes cheap assignments in order", "[structural]") {
  // more rows than columns: the search starts from columns and grabs the first free row
  const auto m = from_pattern({"11", "11", "11"});
  const auto mt = maxtrans_dfs(m);
  CHECK(mt.size == 2);
  CHECK(mt.col_to_row[0] == 0);
  CHECK(mt.col_to_row[1] == 1);
  CHECK(mt.row_to_col[2] == -1);
  // fewer rows: the search starts from rows
  const auto w = maxtrans_dfs(from_pattern({"111", "111"}));
  CHECK(w.row_to_col[0] == 0);
  CHECK(w.row_to_col[1] == 1);
}
