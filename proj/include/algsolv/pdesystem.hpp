#pragma once

// The explicit return-method trajectory and the adjoint linearized system
// built around it, all as exact polynomials on the local branch
// b(w) = w, c(x3) = x3^2 of the profile functions.
//
//   g(t, w, x3) = S * b(w) * c'(x3)                = 2 S w x3
//   h(t, w, x3) = -2 S (b(w) + w b'(w)) c(x3)      = -4 S w x3^2
//   ybar = (g x1, g x2, h) evaluated at w = x1^2 + x2^2
//
// The adjoint system has unknowns (z1, z2, pi) and right-hand sides
// phi1..phi4. Eliminating pi (d3 of rows 1-2 minus d1, d2 of row 3) leaves
// three equations in z1, z2 only; those are what get prolonged.

#include <array>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "algsolv/equation.hpp"
#include "algsolv/polyring.hpp"

namespace algsolv {

struct TrajectoryFields {
  Poly ybar1, ybar2, ybar3;
  Poly pbar_x1, pbar_x2;
  // g and h in the (t, w, x3) chart, with w stored in the X1 slot.
  Poly g_chart, h_chart;
};

namespace detail {

inline Poly X(int axis) { return Poly::var(static_cast<Var>(static_cast<int>(Var::X1) + axis - 1)); }
inline Poly S() { return Poly::var(Var::S); }

inline Poly laplacian(const Poly& p) {
  Poly out;
  for (int i = 1; i <= 3; ++i) out += derive_space(derive_space(p, i), i);
  return out;
}

inline Poly chart_to_cartesian(const Poly& p) {
  return substitute(p, Var::X1, X(1) * X(1) + X(2) * X(2));
}

}  // namespace detail

inline TrajectoryFields build_trajectory(const DerivationParams& params = {}) {
  using detail::S;
  using detail::X;
  const Poly w = X(1);  // chart variable
  const Poly b = w, db = Poly(1);
  const Poly c = X(3) * X(3), dc = derive_space(c, 3);

  TrajectoryFields f;
  f.g_chart = S() * b * dc;
  f.h_chart = Poly(-2) * S() * (b + w * db) * c;

  const Poly g = detail::chart_to_cartesian(f.g_chart);
  f.ybar1 = g * X(1);
  f.ybar2 = g * X(2);
  f.ybar3 = detail::chart_to_cartesian(f.h_chart);

  // d/dx_i pbar = 2 x_i (d/dw phat)(r^2) = -x_i * integrand(r^2).
  const Poly& gc = f.g_chart;
  const Poly dg_w = derive_space(gc, 1);
  const Poly integrand = derive_time(gc, params) -
                         (Poly(4) * w * derive_space(dg_w, 1) + Poly(8) * dg_w + derive_space(derive_space(gc, 3), 3)) +
                         Poly(2) * w * gc * dg_w + gc * gc + f.h_chart * derive_space(gc, 3);
  const Poly at_r2 = detail::chart_to_cartesian(integrand);
  f.pbar_x1 = -(X(1) * at_r2);
  f.pbar_x2 = -(X(2) * at_r2);
  return f;
}

struct TrajectoryCheck {
  bool ok = false;
  Poly divergence;
  Poly residual1, residual2;
};

/// Checks div ybar = 0 and the first two momentum equations as polynomial identities.
inline TrajectoryCheck verify_trajectory_pde(const TrajectoryFields& f, const DerivationParams& params = {}) {
  const std::array<const Poly*, 3> y{&f.ybar1, &f.ybar2, &f.ybar3};
  auto transport = [&](const Poly& q) {
    Poly out;
    for (int j = 1; j <= 3; ++j) out += *y[j - 1] * derive_space(q, j);
    return out;
  };
  TrajectoryCheck r;
  r.divergence = derive_space(f.ybar1, 1) + derive_space(f.ybar2, 2) + derive_space(f.ybar3, 3);
  r.residual1 = derive_time(f.ybar1, params) - detail::laplacian(f.ybar1) + transport(f.ybar1) + f.pbar_x1;
  r.residual2 = derive_time(f.ybar2, params) - detail::laplacian(f.ybar2) + transport(f.ybar2) + f.pbar_x2;
  r.ok = r.divergence.is_zero() && r.residual1.is_zero() && r.residual2.is_zero();
  return r;
}

/// The four adjoint equations in (z1, z2, pi) with right-hand sides phi1..phi4.
inline std::array<Equation<Poly>, 4> build_adjoint_system(const TrajectoryFields& f) {
  const std::array<const Poly*, 3> y{&f.ybar1, &f.ybar2, &f.ybar3};
  const MultiIndex none{};
  const MultiIndex dt{1, 0, 0, 0};
  auto d = [](int axis) { return MultiIndex{}.bumped(axis); };
  auto dd = [](int axis) { return MultiIndex{}.bumped(axis, 2); };

  std::array<Equation<Poly>, 4> sys;
  // Rows 1 and 2: -z_t - Lap z - (ybar . grad) z + d_i ybar1 z1 + d_i ybar2 z2 - d_i pi = phi_i.
  for (int i = 1; i <= 2; ++i) {
    auto& eq = sys[i - 1];
    const UnknownId zi = i == 1 ? UnknownId::z1 : UnknownId::z2;
    eq.add_lhs(zi, dt, Poly(-1));
    for (int j = 1; j <= 3; ++j) {
      eq.add_lhs(zi, dd(j), Poly(-1));
      eq.add_lhs(zi, d(j), -*y[j - 1]);
    }
    eq.add_lhs(UnknownId::z1, none, derive_space(f.ybar1, i));
    eq.add_lhs(UnknownId::z2, none, derive_space(f.ybar2, i));
    eq.add_lhs(UnknownId::pi, d(i), Poly(-1));
    eq.add_rhs(i == 1 ? UnknownId::phi1 : UnknownId::phi2, none, Poly(1));
  }
  // Row 3: d3 ybar1 z1 + d3 ybar2 z2 - d3 pi = phi3.
  sys[2].add_lhs(UnknownId::z1, none, derive_space(f.ybar1, 3));
  sys[2].add_lhs(UnknownId::z2, none, derive_space(f.ybar2, 3));
  sys[2].add_lhs(UnknownId::pi, d(3), Poly(-1));
  sys[2].add_rhs(UnknownId::phi3, none, Poly(1));
  // Row 4: -d1 z1 - d2 z2 = phi4.
  sys[3].add_lhs(UnknownId::z1, d(1), Poly(-1));
  sys[3].add_lhs(UnknownId::z2, d(2), Poly(-1));
  sys[3].add_rhs(UnknownId::phi4, none, Poly(1));
  return sys;
}

struct PressureNotEliminated : std::logic_error {
  using std::logic_error::logic_error;
};

/// d3(row1) - d1(row3), d3(row2) - d2(row3), row4.
inline std::array<Equation<Poly>, 3> eliminate_pressure(const std::array<Equation<Poly>, 4>& adjoint,
                                                         const DerivationParams& params = {}) {
  std::array<Equation<Poly>, 3> out{
      derive_equation(adjoint[0], kX3, params) - derive_equation(adjoint[2], kX1, params),
      derive_equation(adjoint[1], kX3, params) - derive_equation(adjoint[2], kX2, params),
      adjoint[3],
  };
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].mentions(UnknownId::pi))
      throw PressureNotEliminated("pressure survives in eliminated equation " + std::to_string(i + 1));
    out[i].level = 0;
  }
  return out;
}

inline std::array<Equation<Poly>, 3> build_eliminated_system(const DerivationParams& params = {}) {
  return eliminate_pressure(build_adjoint_system(build_trajectory(params)), params);
}

// ---------------------------------------------------------------------------
// Literal transcription of the printed explicit system, kept as data so that
// the generated coefficients can be compared term by term. S stands for the
// printed a(t) * eps factor. The printed text has a few typographical slips;
// they are transcribed as printed and listed in documented_printed_typos().

inline std::array<Equation<Poly>, 3> printed_system_literal() {
  using detail::S;
  using detail::X;
  auto mono = [](long c, int e1, int e2, int e3) {
    Monomial m;
    m[Var::X1] = static_cast<std::uint16_t>(e1);
    m[Var::X2] = static_cast<std::uint16_t>(e2);
    m[Var::X3] = static_cast<std::uint16_t>(e3);
    return Poly::monomial(m, Rational(c));
  };
  const MultiIndex d1{0, 1, 0, 0}, d2{0, 0, 1, 0}, d3{0, 0, 0, 1}, none{};
  const MultiIndex d13{0, 1, 0, 1}, d23{0, 0, 1, 1}, d33{0, 0, 0, 2}, d3t{1, 0, 0, 1};
  const MultiIndex d133{0, 1, 0, 2}, d113{0, 2, 0, 1}, d223{0, 0, 2, 1}, d333{0, 0, 0, 3};
  using U = UnknownId;

  std::array<Equation<Poly>, 3> s;
  auto& e1 = s[0];
  e1.add_lhs(U::z1, d1, S() * (mono(-4, 3, 0, 0) + mono(-4, 1, 2, 0)));
  e1.add_lhs(U::z1, d2, S() * (mono(-2, 2, 1, 0) + mono(-2, 0, 3, 0)));
  e1.add_lhs(U::z1, d3, S() * (mono(14, 2, 0, 1) + mono(10, 0, 2, 1)));
  e1.add_lhs(U::z2, d1, S() * (mono(-2, 2, 1, 0) + mono(-2, 0, 3, 0)));
  e1.add_lhs(U::z2, d3, S() * mono(4, 1, 1, 1));
  e1.add_lhs(U::z1, d13, S() * (mono(-2, 3, 0, 1) + mono(-2, 1, 2, 1)));
  e1.add_lhs(U::z1, d23, S() * (mono(-2, 2, 1, 1) + mono(-2, 0, 3, 1)));
  e1.add_lhs(U::z1, d33, S() * (mono(4, 2, 0, 2) + mono(4, 0, 2, 2)));
  e1.add_lhs(U::z1, d3t, Poly(-1));
  e1.add_lhs(U::z1, d133, Poly(-1));  // printed d^3_{x1 x3 x3}
  e1.add_lhs(U::z1, d223, Poly(-1));
  e1.add_lhs(U::z1, d333, Poly(-1));  // printed with a stray "_{333}" subscript
  e1.add_rhs(U::phi1, d3, Poly(1));
  e1.add_rhs(U::phi3, d1, Poly(-1));

  auto& e2 = s[1];
  e2.add_lhs(U::z1, d2, S() * (mono(-2, 3, 0, 0) + mono(-2, 1, 2, 0)));
  e2.add_lhs(U::z1, d3, S() * mono(4, 1, 1, 1));
  e2.add_lhs(U::z2, d1, S() * (mono(-2, 3, 0, 0) + mono(-2, 1, 2, 0)));
  e2.add_lhs(U::z2, d2, S() * (mono(-4, 2, 1, 0) + mono(-4, 0, 3, 0)));
  e2.add_lhs(U::z2, d3, S() * (mono(10, 2, 0, 1) + mono(14, 0, 2, 1)));
  e2.add_lhs(U::z2, d13, S() * (mono(-2, 3, 0, 1) + mono(-2, 1, 2, 1)));
  e2.add_lhs(U::z2, d23, S() * (mono(-2, 2, 1, 1) + mono(-2, 0, 3, 1)));
  e2.add_lhs(U::z2, d33, mono(4, 2, 0, 2) + mono(4, 0, 2, 2));  // printed without eps
  e2.add_lhs(U::z2, d3t, Poly(-1));
  e2.add_lhs(U::z2, d113, Poly(-1));
  e2.add_lhs(U::z2, d223, Poly(-1));
  e2.add_lhs(U::z2, d333, Poly(-1));
  e2.add_rhs(U::phi2, d3, Poly(1));
  e2.add_rhs(U::phi3, d2, Poly(-1));

  auto& e3 = s[2];
  e3.add_lhs(U::z1, d1, Poly(-1));
  e3.add_lhs(U::z2, d2, Poly(-1));
  e3.add_rhs(U::phi4, none, Poly(1));
  return s;
}

struct PrintedTypo {
  int equation;  // 1-based
  TermKey key;
  std::string description;
};

/// Known slips in the printed system. A deviation at one of these keys is expected.
inline std::vector<PrintedTypo> documented_printed_typos() {
  return {
      {1, {UnknownId::z1, {0, 1, 0, 2}}, "printed d^3_{x1x3x3} z1 where d3(Lap z1) gives d^3_{x1x1x3} z1"},
      {1, {UnknownId::z1, {0, 2, 0, 1}}, "d^3_{x1x1x3} z1 missing from the printed row (see previous entry)"},
      {1, {UnknownId::z1, {0, 0, 0, 3}}, "stray subscript in d^3_{x3x3x3} z1_{333}; coefficient unaffected"},
      {2, {UnknownId::z2, {0, 0, 0, 2}}, "eps factor missing on (4x1^2x3^2+4x2^2x3^2) d^2_{x3x3} z2"},
  };
}

enum class PrintedStatus { match, documented_typo, undocumented };

inline const char* name_of(PrintedStatus s) {
  switch (s) {
    case PrintedStatus::match: return "match";
    case PrintedStatus::documented_typo: return "documented_typo";
    case PrintedStatus::undocumented: return "undocumented";
  }
  return "?";
}

struct PrintedEntry {
  int equation;
  bool rhs;
  TermKey key;
  Poly generated, literal;
  PrintedStatus status;
  std::string note;
};

struct PrintedReport {
  std::vector<PrintedEntry> entries;
  int matches = 0, documented = 0, undocumented = 0;
  bool ok() const { return undocumented == 0; }
};

inline PrintedReport crosscheck_printed_system(const std::array<Equation<Poly>, 3>& eliminated) {
  const auto literal = printed_system_literal();
  const auto typos = documented_printed_typos();
  PrintedReport report;

  auto compare_side = [&](int eq, bool rhs, const std::vector<Equation<Poly>::Entry>& gen,
                          const std::vector<Equation<Poly>::Entry>& lit) {
    std::vector<TermKey> keys;
    for (const auto& e : gen) keys.push_back(e.first);
    for (const auto& e : lit) keys.push_back(e.first);
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    for (const auto& key : keys) {
      auto lookup = [&](const std::vector<Equation<Poly>::Entry>& v) {
        auto it = std::find_if(v.begin(), v.end(), [&](const auto& e) { return e.first == key; });
        return it == v.end() ? Poly() : it->second;
      };
      PrintedEntry entry{eq, rhs, key, lookup(gen), lookup(lit), PrintedStatus::match, {}};
      auto typo = std::find_if(typos.begin(), typos.end(),
                               [&](const PrintedTypo& t) { return !rhs && t.equation == eq && t.key == key; });
      if (entry.generated == entry.literal) {
        ++report.matches;
        if (typo != typos.end()) entry.note = typo->description;
      } else if (typo != typos.end()) {
        entry.status = PrintedStatus::documented_typo;
        entry.note = typo->description;
        ++report.documented;
      } else {
        entry.status = PrintedStatus::undocumented;
        ++report.undocumented;
      }
      report.entries.push_back(std::move(entry));
    }
  };
  for (int i = 0; i < 3; ++i) {
    compare_side(i + 1, false, eliminated[i].lhs, literal[i].lhs);
    compare_side(i + 1, true, eliminated[i].rhs, literal[i].rhs);
  }
  return report;
}

/// One line per term: "eq <i> <lhs|rhs> <unknown> a0 a1 a2 a3 : <poly>".
inline std::string dump_system(const std::array<Equation<Poly>, 3>& sys) {
  std::ostringstream out;
  for (std::size_t i = 0; i < sys.size(); ++i) {
    auto emit = [&](const char* side, const std::vector<Equation<Poly>::Entry>& v) {
      for (const auto& [k, c] : v) {
        out << "eq " << i + 1 << ' ' << side << ' ' << name_of(k.unknown);
        for (int a = 0; a < 4; ++a) out << ' ' << k.deriv[a];
        out << " : " << to_string(c) << '\n';
      }
    };
    emit("lhs", sys[i].lhs);
    emit("rhs", sys[i].rhs);
  }
  return out.str();
}

}  // namespace algsolv
