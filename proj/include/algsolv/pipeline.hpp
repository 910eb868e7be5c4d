#pragma once

// End-to-end certification run and its JSON certificate.
//
// build -> evaluate -> null columns -> sub-selection -> coarse DM -> square
// overdetermined block -> fine DM -> P -> robustness -> target columns ->
// exact rank -> stencil manifest.
//
// Hard checks decide the exit status. Soft checks compare against reference
// values that depend on construction conventions and only ever warn.

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <streambuf>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "algsolv/combinatorics.hpp"
#include "algsolv/exactrank.hpp"
#include "algsolv/pdesystem.hpp"
#include "algsolv/prolongation.hpp"
#include "algsolv/structural.hpp"

namespace algsolv {

inline constexpr const char* kToolName = "algsolv";
inline constexpr const char* kToolVersion = "1.0.0";

/// The certification point (e, s, x1, x2, x3) = (0, 1, 11/10, 12/10, 13/10).
inline Point reference_point() {
  return {Rational(0), Rational(1), Rational(11, 10), Rational(6, 5), Rational(13, 10)};
}

/// "e,s,x1,x2,x3", each a fraction or an exact decimal.
inline Point parse_point(const std::string& text) {
  Point p;
  std::size_t k = 0, start = 0;
  for (;;) {
    const auto comma = text.find(',', start);
    const auto piece = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (k >= p.size()) throw std::invalid_argument("point: expected 5 coordinates");
    p[k++] = parse_rational(piece);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (k != p.size()) throw std::invalid_argument("point: expected 5 coordinates");
  return p;
}

// ---------------------------------------------------------------------------
// SHA-256 over a stream

class Sha256Buf : public std::streambuf {
 public:
  Sha256Buf() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
    setp(buf_.data(), buf_.data() + buf_.size());
  }
  Sha256Buf(const Sha256Buf&) = delete;
  Sha256Buf& operator=(const Sha256Buf&) = delete;
  ~Sha256Buf() override { EVP_MD_CTX_free(ctx_); }

  std::string hex() {
    drain();
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx_, md, &len);
    std::ostringstream out;
    for (unsigned i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return out.str();
  }

 protected:
  int overflow(int c) override {
    drain();
    if (c != traits_type::eof()) {
      *pptr() = static_cast<char>(c);
      pbump(1);
    }
    return traits_type::not_eof(c);
  }
  int sync() override {
    drain();
    return 0;
  }

 private:
  void drain() {
    EVP_DigestUpdate(ctx_, pbase(), static_cast<std::size_t>(pptr() - pbase()));
    setp(buf_.data(), buf_.data() + buf_.size());
  }
  EVP_MD_CTX* ctx_;
  std::array<char, 1 << 16> buf_{};
};

template <class Writer>
std::string sha256_of(Writer&& write) {
  Sha256Buf buf;
  std::ostream os(&buf);
  write(os);
  os.flush();
  return buf.hex();
}

inline std::string sha256_hex(const std::string& s) {
  return sha256_of([&](std::ostream& os) { os << s; });
}

// ---------------------------------------------------------------------------
// Certificate

enum class CheckStatus { pass, warn, fail, skipped };

NLOHMANN_JSON_SERIALIZE_ENUM(CheckStatus, {{CheckStatus::pass, "pass"},
                                           {CheckStatus::warn, "warn"},
                                           {CheckStatus::fail, "fail"},
                                           {CheckStatus::skipped, "skipped"}})

struct Check {
  std::string name;
  bool hard = false;
  CheckStatus status = CheckStatus::skipped;
  nlohmann::json expected;
  nlohmann::json actual;
  std::string detail;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Check, name, hard, status, expected, actual, detail)

inline void to_json(nlohmann::json& j, const RowId& r) {
  j = {r.base_eq, r.applied[0], r.applied[1], r.applied[2], r.applied[3]};
}
inline void from_json(const nlohmann::json& j, RowId& r) {
  r.base_eq = j.at(0).get<int>();
  for (int a = 0; a < 4; ++a) r.applied[a] = j.at(a + 1).get<int>();
}
inline void to_json(nlohmann::json& j, const ColId& c) {
  j = {name_of(c.unknown), c.deriv[0], c.deriv[1], c.deriv[2], c.deriv[3]};
}
inline void from_json(const nlohmann::json& j, ColId& c) {
  c.unknown = parse_unknown(j.at(0).get<std::string>());
  for (int a = 0; a < 4; ++a) c.deriv[a] = j.at(a + 1).get<int>();
}

struct CertParameters {
  int levels = 19;
  int sub_levels = 15;
  std::string nu = "1/1";
  std::array<std::string, 5> point{};
  std::vector<std::uint64_t> primes;
  std::string matching;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CertParameters, levels, sub_levels, nu, point, primes, matching)

struct CertTrajectory {
  bool divergence_zero = false;
  bool momentum_zero = false;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CertTrajectory, divergence_zero, momentum_zero)

struct CertDeviation {
  int equation = 0;
  std::string side, term, status, generated, printed, note;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CertDeviation, equation, side, term, status, generated, printed, note)

struct CertCrosscheck {
  int matches = 0, documented = 0, undocumented = 0;
  std::vector<CertDeviation> deviations;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CertCrosscheck, matches, documented, undocumented, deviations)

struct CertDimensions {
  std::size_t rows = 0, cols = 0;
  std::size_t a1_rows = 0, a1_cols = 0;
  std::size_t sub_rows = 0, sub_cols = 0;
  std::size_t max_column_order = 0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CertDimensions, rows, cols, a1_rows, a1_cols, sub_rows, sub_cols, max_column_order)

struct CertNnz {
  std::size_t symbolic = 0;
  std::size_t at_point = 0;
  std::size_t vanishing_at_point = 0;
  double avg_per_row_at_point = 0;
  std::size_t distinct_coefficients = 0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CertNnz, symbolic, at_point, vanishing_at_point, avg_per_row_at_point,
                                   distinct_coefficients)

struct CertNullColumns {
  std::size_t count = 0;
  bool all_symbolically_null = false;
  std::vector<ColId> columns;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CertNullColumns, count, all_symbolically_null, columns)

struct CertSprank {
  std::size_t n0_rows = 0, n0_cols = 0, n0 = 0;
  std::size_t sub = 0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CertSprank, n0_rows, n0_cols, n0, sub)

struct CertDm {
  std::array<std::size_t, 2> under{}, square{}, over{};
  std::size_t over_square = 0;
  bool over_square_full_sprank = false;
  bool staircase_valid = false;
  std::size_t fine_block_count = 0;
  std::vector<std::size_t> fine_block_sizes;
  std::size_t last_block = 0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CertDm, under, square, over, over_square, over_square_full_sprank, staircase_valid,
                                   fine_block_count, fine_block_sizes, last_block)

struct CertP {
  std::size_t rows = 0, cols = 0;
  std::size_t zero_block_rows = 0, zero_block_cols = 0;
  std::size_t nnz_at_point = 0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CertP, rows, cols, zero_block_rows, zero_block_cols, nnz_at_point)

struct CertRobustness {
  bool robust = false;
  std::size_t violations = 0;
  std::size_t violations_vanishing_at_point = 0;
  std::size_t theta_entries_in_p_rows = 0;
  std::vector<std::array<std::uint32_t, 2>> sample;  // 1-based (row, col) in L0, at most 20
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CertRobustness, robust, violations, violations_vanishing_at_point,
                                   theta_entries_in_p_rows, sample)

struct CertTargets {
  bool all_inside = false;
  std::array<std::int64_t, 6> positions{};
  std::size_t p_z1_columns = 0, p_z2_columns = 0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CertTargets, all_inside, positions, p_z1_columns, p_z2_columns)

struct CertRank {
  bool computed = false;
  std::size_t rows = 0, cols = 0;
  std::string method;
  std::vector<std::uint64_t> primes;
  std::vector<std::size_t> ranks_mod_p;
  std::size_t rank = 0;
  std::string conclusion;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CertRank, computed, rows, cols, method, primes, ranks_mod_p, rank, conclusion)

// Rank of the square overdetermined block. No target; recorded because the block
// is known not to be of maximal rank. Mod-p ranks are lower bounds for the rational rank.
struct CertBlockRank {
  bool computed = false;
  std::size_t size = 0;
  std::vector<std::uint64_t> primes;
  std::vector<std::size_t> ranks_mod_p;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CertBlockRank, computed, size, primes, ranks_mod_p)

struct StencilManifest {
  std::vector<RowId> rows;  // P's rows in P's order
  std::vector<ColId> cols;  // P's columns in P's order
  int max_row_level = -1;
  std::array<int, 3> max_row_level_by_equation{-1, -1, -1};
  // Order with respect to the adjoint unknowns: rows of equations 1-2 carry one
  // extra derivative from the pressure elimination, equation 3 does not.
  int operator_order = -1;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(StencilManifest, rows, cols, max_row_level, max_row_level_by_equation,
                                   operator_order)

struct CertHashes {
  std::string l0_polymtx;
  std::string l0_point_mtx;
  std::string p_point_mtx;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CertHashes, l0_polymtx, l0_point_mtx, p_point_mtx)

struct Certificate {
  std::string tool = kToolName;
  std::string version = kToolVersion;
  CertParameters parameters;
  CertTrajectory trajectory;
  CertCrosscheck crosscheck;
  CertDimensions dimensions;
  CertNnz nnz;
  CertNullColumns null_columns;
  CertSprank sprank;
  CertDm dm;
  CertP p;
  CertRobustness robustness;
  CertTargets targets;
  CertRank rank;
  CertBlockRank over_square_rank;
  StencilManifest manifest;
  CertHashes hashes;
  std::vector<std::string> notes;
  std::vector<Check> checks;
  bool pass = false;

  const Check* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
  std::vector<std::string> with_status(CheckStatus s) const {
    std::vector<std::string> out;
    for (const auto& c : checks)
      if (c.status == s) out.push_back(c.name);
    return out;
  }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Certificate, tool, version, parameters, trajectory, crosscheck, dimensions, nnz,
                                   null_columns, sprank, dm, p, robustness, targets, rank, over_square_rank, manifest, hashes, notes,
                                   checks, pass)

/// Keys are sorted (std::map backed json), so equal certificates give equal text.
inline std::string certificate_to_string(const Certificate& c) { return nlohmann::json(c).dump(1) + "\n"; }
inline Certificate certificate_from_string(const std::string& s) { return nlohmann::json::parse(s).get<Certificate>(); }

// ---------------------------------------------------------------------------
// Reference values; exact match expected, a mismatch only warns.

struct ReferenceValues {
  std::size_t nnz_at_point = 651128;
  double avg_per_row = 21.44;
  std::size_t sprank_n0 = 28654;
  std::size_t null_columns = 140;
  std::size_t over_square = 9050;
  std::size_t fine_blocks = 352;
  std::size_t last_block = 7321;
  std::array<std::int64_t, 6> target_positions{1, 2, 3, 3633, 3634, 3635};
  int operator_order = 17;
};

// ---------------------------------------------------------------------------
// Run

/// Flips the sign of one left-hand coefficient of the eliminated system.
struct SignFlip {
  int equation = 1;       // 1-based
  std::size_t term = 0;   // index into the sorted lhs
};

struct PipelineOptions {
  int levels = 19;
  int sub_levels = 15;
  Rational nu{1};
  Point point = reference_point();
  std::vector<std::uint64_t> primes{PrimeField::kDefaultPrime, PrimeField::kFallbackPrime};
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  bool certify_rank = true;
  bool over_square_rank = true;  // also rank the block P sits in; needs certify_rank
  bool hash_polymtx = true;
  MatchingMethod matching = MatchingMethod::maxtrans_dfs;
  bool printed_system = false;  // build from the printed transcription, typos included
  std::optional<SignFlip> fault;
  std::function<void(const std::string&)> log;
};

struct PipelineRun {
  Certificate certificate;
  std::optional<PolyMatrix<JetCoeff>> l0;
  std::optional<RatMatrix> l0_point;  // evaluated L0
  std::optional<RatMatrix> p_point;   // P at the point, in P's order
  // wall time per stage, in run order; not part of the certificate
  std::vector<std::pair<std::string, double>> stage_seconds;
  double seconds(const std::string& stage) const {
    for (const auto& [n, t] : stage_seconds)
      if (n == stage) return t;
    return 0.0;
  }
};

namespace detail {

class CheckBook {
 public:
  explicit CheckBook(std::vector<Check>& out) : out_(out) {}

  void hard(std::string name, bool ok, nlohmann::json expected, nlohmann::json actual, std::string detail = {}) {
    out_.push_back({std::move(name), true, ok ? CheckStatus::pass : CheckStatus::fail, std::move(expected),
                    std::move(actual), std::move(detail)});
  }
  void soft(std::string name, nlohmann::json expected, nlohmann::json actual, std::string detail = {}) {
    const bool ok = expected == actual;
    if (!ok && detail.empty()) detail = diff_text(expected, actual);
    out_.push_back({std::move(name), false, ok ? CheckStatus::pass : CheckStatus::warn, std::move(expected),
                    std::move(actual), std::move(detail)});
  }
  void skipped(std::string name, bool hard, std::string why) {
    out_.push_back({std::move(name), hard, CheckStatus::skipped, nullptr, nullptr, std::move(why)});
  }

 private:
  static std::string diff_text(const nlohmann::json& e, const nlohmann::json& a) {
    if (e.is_number_integer() && a.is_number_integer()) {
      const auto d = a.get<std::int64_t>() - e.get<std::int64_t>();
      return "difference " + std::string(d > 0 ? "+" : "") + std::to_string(d);
    }
    if (e.is_array() && a.is_array() && e.size() == a.size()) {
      std::string out = "differs at index";
      for (std::size_t k = 0; k < e.size(); ++k)
        if (e[k] != a[k]) out += " " + std::to_string(k);
      return out;
    }
    return "mismatch";
  }
  std::vector<Check>& out_;
};

inline std::array<std::size_t, 2> dims(const BlockRange& b) { return {b.rows(), b.cols()}; }

}  // namespace detail

/// Overall verdict: every hard check passed. Warnings never change it.
inline bool all_hard_pass(const Certificate& c) {
  for (const auto& k : c.checks)
    if (k.hard && k.status != CheckStatus::pass) return false;
  return true;
}

inline PipelineRun run_pipeline(const PipelineOptions& opt) {
  PipelineRun run;
  std::string stage;
  auto stage_start = std::chrono::steady_clock::now();
  auto close_stage = [&] {
    const auto now = std::chrono::steady_clock::now();
    if (!stage.empty()) run.stage_seconds.emplace_back(stage, std::chrono::duration<double>(now - stage_start).count());
    stage_start = now;
  };
  auto begin = [&](const std::string& name, const std::string& s) {
    close_stage();
    stage = name;
    if (opt.log) opt.log(s);
  };
  Certificate& cert = run.certificate;
  detail::CheckBook book(cert.checks);
  const ReferenceValues ref;
  const bool reference_build = opt.levels == 19 && opt.sub_levels == 15;
  const char* non_reference = "reference value applies to levels 19 / sub-levels 15 only";

  if (opt.levels < 0 || opt.sub_levels < 0 || opt.sub_levels > opt.levels)
    throw std::invalid_argument("need 0 <= sub_levels <= levels");

  cert.parameters.levels = opt.levels;
  cert.parameters.sub_levels = opt.sub_levels;
  cert.parameters.nu = to_fraction_string(opt.nu);
  for (std::size_t k = 0; k < opt.point.size(); ++k) cert.parameters.point[k] = to_fraction_string(opt.point[k]);
  cert.parameters.primes = opt.primes;
  cert.parameters.matching = name_of(opt.matching);

  cert.notes.push_back("columns carry every derivative of z1, z2 up to order levels+3 (22 at 19 levels); "
                       "this is what makes the column count equal 2F(levels+3)");
  cert.notes.push_back("nnz.at_point counts the nonzero values of L0 at the point (Theta0); "
                       "nnz.symbolic counts nonzero polynomial entries (Theta)");
  if (opt.point == reference_point())
    cert.notes.push_back("x = (11/10, 12/10, 13/10) lies outside the physical cylinder; the algebraic rank argument "
                         "does not use membership");

  DerivationParams params;
  params.nu = opt.nu;

  // trajectory and eliminated system
  begin("system", "trajectory");
  const auto traj = verify_trajectory_pde(build_trajectory(params), params);
  cert.trajectory = {traj.divergence.is_zero(), traj.residual1.is_zero() && traj.residual2.is_zero()};
  book.hard("trajectory", traj.ok, true, traj.ok, traj.ok ? "" : "trajectory residual is not identically zero");

  auto system = build_eliminated_system(params);
  if (opt.printed_system) {
    system = printed_system_literal();
    cert.notes.push_back("built from the printed transcription, documented typos included");
  }
  if (opt.fault) {
    auto& lhs = system.at(static_cast<std::size_t>(opt.fault->equation - 1)).lhs;
    lhs.at(opt.fault->term).second = -lhs.at(opt.fault->term).second;
    cert.notes.push_back("fault injected: sign flip of term " + std::to_string(opt.fault->term) + " of equation " +
                         std::to_string(opt.fault->equation));
  }
  const auto cross = crosscheck_printed_system(system);
  cert.crosscheck.matches = cross.matches;
  cert.crosscheck.documented = cross.documented;
  cert.crosscheck.undocumented = cross.undocumented;
  for (const auto& e : cross.entries) {
    if (e.status == PrintedStatus::match) continue;
    cert.crosscheck.deviations.push_back({e.equation, e.rhs ? "rhs" : "lhs", e.key.to_string(), name_of(e.status),
                                          to_string(e.generated), to_string(e.literal), e.note});
  }
  book.hard("printed_system_crosscheck", cross.ok(), 0, cross.undocumented,
            cross.ok() ? "" : std::to_string(cross.undocumented) + " undocumented deviation(s)");

  // build
  begin("build", "prolongation to level " + std::to_string(opt.levels));
  System3<Poly> sys3{system[0], system[1], system[2]};
  run.l0 = prolong(to_jet(sys3), opt.levels, ProlongOptions{params, opt.threads});
  const auto& m = *run.l0;

  auto& d = cert.dimensions;
  d.rows = m.nrows();
  d.cols = m.ncols();
  d.max_column_order = static_cast<std::size_t>(opt.levels + 3);
  for (const auto& r : m.row_ids()) d.a1_rows += r.base_eq == 1;
  for (const auto& c : m.col_ids()) d.a1_cols += c.unknown == UnknownId::z1;
  {
    const std::array<std::uint64_t, 4> expected{count_G(opt.levels), count_H(opt.levels), count_F(opt.levels),
                                                count_F(opt.levels + 3)};
    const std::array<std::uint64_t, 4> actual{d.rows, d.cols, d.a1_rows, d.a1_cols};
    bool ok = expected == actual;
    if (opt.levels == 19) ok = ok && d.rows == 30360 && d.cols == 29900 && d.a1_rows == 8855 && d.a1_cols == 14950;
    book.hard("dimensions", ok, expected, actual, "[rows, cols, A1 rows, A1 cols]");
  }

  if (opt.hash_polymtx) {
    begin("hash", "hashing .polymtx serialization");
    cert.hashes.l0_polymtx = sha256_of([&](std::ostream& os) { write_polymtx(os, m, params); });
  }

  // evaluate
  begin("evaluate", "evaluation at the point");
  auto ev = evaluate_matrix(m, opt.point, params);
  const RatMatrix& l0 = ev.matrix;
  cert.nnz.symbolic = m.nnz();
  cert.nnz.at_point = l0.nnz();
  cert.nnz.vanishing_at_point = ev.theta_minus_theta0.size();
  cert.nnz.avg_per_row_at_point = l0.nrows() ? static_cast<double>(l0.nnz()) / l0.nrows() : 0.0;
  cert.nnz.distinct_coefficients = m.pool().size();
  cert.hashes.l0_point_mtx = sha256_of([&](std::ostream& os) { write_matrix_market(os, l0); });
  if (reference_build) {
    book.soft("nnz_at_point", ref.nnz_at_point, cert.nnz.at_point);
    // the reference figure is truncated to two decimals
    const double avg2 = std::floor(cert.nnz.avg_per_row_at_point * 100) / 100;
    book.soft("avg_nnz_per_row", ref.avg_per_row, avg2,
              avg2 == ref.avg_per_row ? "" : "unrounded " + std::to_string(cert.nnz.avg_per_row_at_point));
  } else {
    book.skipped("nnz_at_point", false, non_reference);
    book.skipped("avg_nnz_per_row", false, non_reference);
  }

  // null columns and N0
  begin("sprank", "null columns and structural rank");
  const auto nulls = null_columns(m, l0);
  cert.null_columns.count = nulls.count;
  cert.null_columns.all_symbolically_null = nulls.all_symbolically_null;
  for (auto c : nulls.indices) cert.null_columns.columns.push_back(m.col_id(c));
  book.hard("null_columns_symbolically_null", nulls.all_symbolically_null, true, nulls.all_symbolically_null);
  if (reference_build)
    book.soft("null_column_count", ref.null_columns, nulls.count);
  else
    book.skipped("null_column_count", false, non_reference);

  {
    std::vector<std::uint32_t> all_rows(l0.nrows()), kept_cols;
    std::iota(all_rows.begin(), all_rows.end(), 0u);
    std::vector<bool> is_null(l0.ncols(), false);
    for (auto c : nulls.indices) is_null[c] = true;
    for (std::uint32_t c = 0; c < l0.ncols(); ++c)
      if (!is_null[c]) kept_cols.push_back(c);
    const auto n0 = l0.submatrix(all_rows, kept_cols);
    cert.sprank.n0_rows = n0.nrows();
    cert.sprank.n0_cols = n0.ncols();
    cert.sprank.n0 = sprank(n0);
  }
  if (reference_build)
    book.soft("sprank_n0", ref.sprank_n0, cert.sprank.n0);
  else
    book.skipped("sprank_n0", false, non_reference);

  // sub-selection: equations 1-2 up to sub_levels, equation 3 up to sub_levels + 2,
  // derivatives of order <= sub_levels + 3
  begin("dm", "sub-selection at level " + std::to_string(opt.sub_levels));
  std::vector<std::uint32_t> sub_rows, sub_cols;
  for (std::uint32_t r = 0; r < m.nrows(); ++r) {
    const auto& id = m.row_id(r);
    if (static_cast<int>(id.applied.degree()) <= (id.base_eq == 3 ? opt.sub_levels + 2 : opt.sub_levels))
      sub_rows.push_back(r);
  }
  for (std::uint32_t c = 0; c < m.ncols(); ++c)
    if (static_cast<int>(m.col_id(c).deriv.degree()) <= opt.sub_levels + 3) sub_cols.push_back(c);
  const auto sub = l0.submatrix(sub_rows, sub_cols);
  d.sub_rows = sub.nrows();
  d.sub_cols = sub.ncols();

  if (opt.log) opt.log("coarse decomposition");
  const auto dm = dm_decompose(sub, opt.matching);
  cert.sprank.sub = dm.matching.size;
  cert.dm.under = detail::dims(dm.under());
  cert.dm.square = detail::dims(dm.square());
  cert.dm.over = detail::dims(dm.over());
  cert.dm.staircase_valid = dm_staircase_valid(sub, dm);
  book.hard("dm_staircase", cert.dm.staircase_valid, true, cert.dm.staircase_valid);

  const auto os = dm.over_square();
  const auto lbar = sub.submatrix(dm.rows_of(os), dm.cols_of(os));
  cert.dm.over_square = os.rows();
  cert.dm.over_square_full_sprank = os.rows() > 0 && os.rows() == os.cols() && sprank(lbar) == os.rows();
  book.hard("over_square_block", cert.dm.over_square_full_sprank, "nonempty, square, full structural rank",
            nlohmann::json{os.rows(), os.cols()});
  if (reference_build)
    book.soft("over_square_size", ref.over_square, os.rows());
  else
    book.skipped("over_square_size", false, non_reference);

  if (opt.log) opt.log("fine decomposition");
  const auto fine = dm_decompose(lbar, opt.matching);
  cert.dm.fine_block_count = fine.fine_blocks.size();
  for (const auto& b : fine.fine_blocks) cert.dm.fine_block_sizes.push_back(b.rows());
  cert.dm.last_block = fine.fine_blocks.empty() ? 0 : fine.fine_blocks.back().rows();
  if (reference_build) {
    book.soft("fine_block_count", ref.fine_blocks, cert.dm.fine_block_count);
    book.soft("last_block_size", ref.last_block, cert.dm.last_block);
  } else {
    book.skipped("fine_block_count", false, non_reference);
    book.skipped("last_block_size", false, non_reference);
  }

  if (fine.fine_blocks.empty()) {
    book.hard("robustness", false, 0, nullptr, "no final block");
    book.hard("targets_in_p", false, true, false, "no final block");
    book.hard("p_full_rank", false, "certified-full-rank", nullptr, "no final block");
    cert.pass = all_hard_pass(cert);
    close_stage();
    return run;
  }

  // P = last fine block of the square overdetermined block, mapped back to L0
  const auto last = fine.fine_blocks.back();
  std::vector<std::uint32_t> p_rows, p_cols;
  for (auto k : fine.rows_of(last)) p_rows.push_back(lbar.source_rows()[k]);
  for (auto k : fine.cols_of(last)) p_cols.push_back(lbar.source_cols()[k]);
  run.p_point = l0.submatrix(p_rows, p_cols);
  const RatMatrix& p0 = *run.p_point;
  cert.hashes.p_point_mtx = sha256_of([&](std::ostream& os2) { write_matrix_market(os2, p0); });

  begin("pqr", "robustness of the block form");
  const auto pqr = extract_pqr(m, l0, p_rows, p_cols);
  cert.p = {p0.nrows(), p0.ncols(), pqr.zero_block_rows, pqr.zero_block_cols, p0.nnz()};
  cert.robustness.robust = pqr.robust();
  cert.robustness.violations = pqr.violations.size();
  cert.robustness.theta_entries_in_p_rows = pqr.theta_entries_in_p_rows;
  for (const auto& v : pqr.violations) {
    cert.robustness.violations_vanishing_at_point += v.vanishes_at_point;
    if (cert.robustness.sample.size() < 20) cert.robustness.sample.push_back({v.row + 1, v.col + 1});
  }
  book.hard("robustness", pqr.robust(), 0, pqr.violations.size(),
            pqr.robust() ? "" : "Theta entries inside the zero block");

  const auto targets = target_column_check(pqr, m.col_ids());
  cert.targets.all_inside = targets.all_inside;
  cert.targets.positions = targets.positions;
  for (auto c : p_cols) (m.col_id(c).unknown == UnknownId::z1 ? cert.targets.p_z1_columns : cert.targets.p_z2_columns)++;
  book.hard("targets_in_p", targets.all_inside, true, targets.all_inside);
  if (reference_build)
    book.soft("target_positions", ref.target_positions, targets.positions);
  else
    book.skipped("target_positions", false, non_reference);

  // stencil manifest
  auto& mf = cert.manifest;
  for (auto r : p_rows) {
    const auto& id = m.row_id(r);
    mf.rows.push_back(id);
    const int lvl = static_cast<int>(id.applied.degree());
    mf.max_row_level = std::max(mf.max_row_level, lvl);
    auto& per = mf.max_row_level_by_equation[static_cast<std::size_t>(id.base_eq - 1)];
    per = std::max(per, lvl);
  }
  for (auto c : p_cols) mf.cols.push_back(m.col_id(c));
  for (std::size_t e = 0; e < 3; ++e)
    if (mf.max_row_level_by_equation[e] >= 0)
      mf.operator_order = std::max(mf.operator_order, mf.max_row_level_by_equation[e] + (e < 2 ? 1 : 0));
  if (reference_build)
    book.soft("operator_order", ref.operator_order, mf.operator_order,
              mf.operator_order == ref.operator_order
                  ? ""
                  : "row levels by equation " + std::to_string(mf.max_row_level_by_equation[0]) + "/" +
                        std::to_string(mf.max_row_level_by_equation[1]) + "/" +
                        std::to_string(mf.max_row_level_by_equation[2]));
  else
    book.skipped("operator_order", false, non_reference);

  // exact rank of P at the point
  if (opt.certify_rank) {
    begin("rank", "rank of P modulo word-size primes (" + std::to_string(p0.nrows()) + "x" + std::to_string(p0.ncols()) + ")");
    CertifyOptions co;
    co.primes = opt.primes;
    const auto rc = certify_full_rank(p0, co);
    cert.rank = {true, rc.rows, rc.cols, rc.method, rc.primes, rc.ranks_mod_p, rc.rank, name_of(rc.conclusion)};
    std::string detail;
    if (!rc.full_rank())
      detail = "rank >= " + std::to_string(rc.rank) + " of " + std::to_string(std::min(rc.rows, rc.cols)) +
               "; no prime gave full rank";
    book.hard("p_full_rank", rc.full_rank(), "certified-full-rank", name_of(rc.conclusion), detail);

    if (opt.over_square_rank) {
      if (opt.log) opt.log("rank of the square overdetermined block (" + std::to_string(lbar.nrows()) + "x" +
                           std::to_string(lbar.ncols()) + ")");
      auto& br = cert.over_square_rank;
      br.computed = true;
      br.size = lbar.nrows();
      for (auto prime : opt.primes) {
        try {
          br.ranks_mod_p.push_back(rank_mod_p(lbar, PrimeField(prime)));
          br.primes.push_back(prime);
        } catch (const DenominatorNotInvertible&) {
        }
      }
    }
  } else {
    book.skipped("p_full_rank", true, "rank certification disabled");
  }

  cert.pass = all_hard_pass(cert);
  close_stage();
  return run;
}

// ---------------------------------------------------------------------------
// Spy plots

struct SpyGrid {
  std::size_t rows = 0, cols = 0, nnz = 0;
  std::size_t scale = 1;  // matrix entries per cell along each axis
  std::size_t grid_rows = 0, grid_cols = 0;
  std::vector<std::uint32_t> counts;  // row-major grid_rows x grid_cols
  std::uint32_t max_count = 0;
};

inline SpyGrid spy_grid(const RatMatrix& m, std::size_t max_cells = 1000) {
  SpyGrid g;
  g.rows = m.nrows();
  g.cols = m.ncols();
  g.nnz = m.nnz();
  const std::size_t big = std::max<std::size_t>({g.rows, g.cols, 1});
  g.scale = (big + max_cells - 1) / max_cells;
  g.grid_rows = (g.rows + g.scale - 1) / g.scale;
  g.grid_cols = (g.cols + g.scale - 1) / g.scale;
  g.counts.assign(g.grid_rows * g.grid_cols, 0);
  for (std::size_t r = 0; r < g.rows; ++r)
    for (auto c : m.row_cols(r)) {
      auto& cell = g.counts[(r / g.scale) * g.grid_cols + c / g.scale];
      g.max_count = std::max(g.max_count, ++cell);
    }
  return g;
}

inline void write_spy_svg(std::ostream& out, const RatMatrix& m, const std::string& title) {
  const auto g = spy_grid(m);
  const double px = 800.0 / static_cast<double>(std::max<std::size_t>({g.grid_rows, g.grid_cols, 1}));
  const double w = g.grid_cols * px, h = g.grid_rows * px;
  const double left = 70, top = 60;
  out << std::fixed << std::setprecision(3);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w + left + 20 << "\" height=\"" << h + top + 40
      << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left << "\" y=\"20\" font-family=\"monospace\" font-size=\"14\">" << title << "</text>\n";
  out << "<text x=\"" << left << "\" y=\"" << top - 10 << "\" font-family=\"monospace\" font-size=\"12\">columns: "
      << g.cols << "</text>\n";
  out << "<text x=\"" << left - 10 << "\" y=\"" << top + h / 2 << "\" font-family=\"monospace\" font-size=\"12\" "
      << "text-anchor=\"middle\" transform=\"rotate(-90 " << left - 10 << ' ' << top + h / 2 << ")\">rows: " << g.rows
      << "</text>\n";
  out << "<text x=\"" << left << "\" y=\"" << top + h + 25 << "\" font-family=\"monospace\" font-size=\"12\">nnz = "
      << g.nnz << (g.scale > 1 ? ", " + std::to_string(g.scale) + "x" + std::to_string(g.scale) + " entries per mark"
                               : std::string())
      << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << w << "\" height=\"" << h
      << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out << "<g fill=\"#1f3a93\">\n";
  for (std::size_t i = 0; i < g.grid_rows; ++i)
    for (std::size_t j = 0; j < g.grid_cols; ++j)
      if (g.counts[i * g.grid_cols + j])
        out << "<rect x=\"" << left + j * px << "\" y=\"" << top + i * px << "\" width=\"" << px << "\" height=\""
            << px << "\"/>\n";
  out << "</g>\n</svg>\n";
}

/// Plain (ASCII) PGM: white background, darker cells hold more nonzeros.
inline void write_spy_pgm(std::ostream& out, const RatMatrix& m) {
  const auto g = spy_grid(m);
  out << "P2\n# " << g.rows << " x " << g.cols << " nnz " << g.nnz << " scale " << g.scale << "\n";
  out << g.grid_cols << ' ' << g.grid_rows << "\n255\n";
  for (std::size_t i = 0; i < g.grid_rows; ++i) {
    for (std::size_t j = 0; j < g.grid_cols; ++j) {
      const auto c = g.counts[i * g.grid_cols + j];
      const int v = c == 0 ? 255 : static_cast<int>(std::lround(200.0 * (1.0 - static_cast<double>(c) / g.max_count)));
      out << v << (j + 1 == g.grid_cols ? '\n' : ' ');
    }
  }
}

}  // namespace algsolv
