// Command line front end: counts, build, certify, spy, dump-system.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "algsolv/pipeline.hpp"

namespace fs = std::filesystem;
using namespace algsolv;

namespace {

struct Common {
  int levels = 19;
  int sub_levels = 15;
  std::string nu = "1";
  std::string point = "0,1,1.1,1.2,1.3";
  std::vector<std::string> primes;
  std::string out_dir = ".";
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::string format;
  std::string matching = "dfs";
  bool printed_system = false;
};

void add_build_flags(CLI::App* app, Common& c) {
  app->add_option("--levels", c.levels, "prolongation level n (equations 1-2 to n, equation 3 to n+2)")
      ->check(CLI::Range(0, 40));
  app->add_option("--nu", c.nu, "viscosity parameter, fraction or exact decimal");
  app->add_option("--point", c.point, "evaluation point e,s,x1,x2,x3");
  app->add_flag("--printed-system", c.printed_system, "build from the printed transcription, typos included");
  app->add_option("--threads", c.threads, "worker threads for the build stage")->check(CLI::PositiveNumber);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

void stderr_log(const std::string& s) {
  static const auto t0 = std::chrono::steady_clock::now();
  const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "[" << std::fixed << std::setprecision(1) << std::setw(7) << t << "s] " << s << std::endl;
}

PipelineOptions pipeline_options(const Common& c) {
  PipelineOptions o;
  o.levels = c.levels;
  o.sub_levels = std::min(c.sub_levels, c.levels);
  o.nu = parse_rational(c.nu);
  o.point = parse_point(c.point);
  o.threads = c.threads;
  o.printed_system = c.printed_system;
  o.matching = c.matching == "dfs" ? MatchingMethod::maxtrans_dfs : MatchingMethod::hopcroft_karp;
  if (!c.primes.empty()) {
    o.primes.clear();
    for (const auto& p : c.primes) {
      const auto v = std::stoull(p);
      if (!is_prime_u64(v)) throw std::invalid_argument("--prime " + p + " is not prime");
      o.primes.push_back(v);
    }
  }
  o.log = stderr_log;
  return o;
}

int cmd_counts(const Common& c) {
  std::cout << std::setw(4) << "n" << std::setw(10) << "E(n)" << std::setw(10) << "F(n)" << std::setw(10) << "G(n)"
            << std::setw(10) << "H(n)" << std::setw(10) << "G-H" << '\n';
  for (int n = 0; n <= c.levels; ++n)
    std::cout << std::setw(4) << n << std::setw(10) << count_E(n) << std::setw(10) << count_F(n) << std::setw(10)
              << count_G(n) << std::setw(10) << count_H(n) << std::setw(10) << count_G_minus_H(n) << '\n';
  return 0;
}

int cmd_build(const Common& c) {
  const auto fmt = c.format.empty() ? std::string("polymtx") : c.format;
  DerivationParams params;
  params.nu = parse_rational(c.nu);
  const auto point = parse_point(c.point);
  fs::create_directories(c.out_dir);

  stderr_log("building L0 at level " + std::to_string(c.levels));
  const auto sys = c.printed_system ? printed_system_literal() : build_eliminated_system(params);
  const auto m = prolong(to_jet(System3<Poly>{sys[0], sys[1], sys[2]}), c.levels, ProlongOptions{params, c.threads});
  const auto st = stats(m);
  const std::string stem = "L0_n" + std::to_string(c.levels);

  nlohmann::json meta;
  meta["tool"] = kToolName;
  meta["version"] = kToolVersion;
  meta["levels"] = c.levels;
  meta["nu"] = to_fraction_string(params.nu);
  meta["printed_system"] = c.printed_system;
  meta["rows"] = st.rows;
  meta["cols"] = st.cols;
  meta["nnz_symbolic"] = st.nnz;
  meta["format"] = fmt;

  fs::path out;
  if (fmt == "polymtx") {
    out = fs::path(c.out_dir) / (stem + ".polymtx");
    auto f = open_out(out);
    write_polymtx(f, m, params);
  } else if (fmt == "mtx") {
    stderr_log("evaluating at the point");
    const auto ev = evaluate_matrix(m, point, params);
    out = fs::path(c.out_dir) / (stem + "_point.mtx");
    auto f = open_out(out);
    write_matrix_market(f, ev.matrix);
    meta["nnz_at_point"] = ev.matrix.nnz();
    meta["point"] = c.point;
  } else if (fmt == "json") {
    stderr_log("evaluating at the point");
    const auto ev = evaluate_matrix(m, point, params);
    meta["nnz_at_point"] = ev.matrix.nnz();
    meta["avg_nnz_per_row_at_point"] = st.rows ? double(ev.matrix.nnz()) / st.rows : 0.0;
    meta["distinct_coefficients"] = m.pool().size();
    meta["point"] = c.point;
  } else {
    throw std::invalid_argument("unknown format " + fmt);
  }
  if (!out.empty()) {
    std::ifstream in(out, std::ios::binary);
    meta["file"] = out.filename().string();
    meta["sha256"] = sha256_of([&](std::ostream& os) { os << in.rdbuf(); });
  }
  const auto meta_path = fs::path(c.out_dir) / (stem + ".json");
  open_out(meta_path) << meta.dump(1) << '\n';
  std::cout << st.rows << ' ' << st.cols << ' ' << st.nnz << '\n';
  if (!out.empty()) std::cout << "wrote " << out.string() << '\n';
  std::cout << "wrote " << meta_path.string() << '\n';
  return 0;
}

void print_checks(const Certificate& cert) {
  for (const auto& k : cert.checks) {
    const char* s = k.status == CheckStatus::pass   ? "PASS"
                    : k.status == CheckStatus::warn ? "WARN"
                    : k.status == CheckStatus::fail ? "FAIL"
                                                    : "SKIP";
    std::cout << std::left << std::setw(5) << s << (k.hard ? "hard " : "soft ") << std::setw(32) << k.name
              << std::right << "expected " << k.expected.dump() << ", got " << k.actual.dump();
    if (!k.detail.empty()) std::cout << "  (" << k.detail << ")";
    std::cout << '\n';
  }
  std::cout << (cert.pass ? "CERTIFICATE: PASS" : "CERTIFICATE: FAIL") << '\n';
}

int cmd_certify(const Common& c, bool no_rank, bool no_block_rank, const std::string& flip) {
  auto o = pipeline_options(c);
  o.certify_rank = !no_rank;
  o.over_square_rank = !no_block_rank;
  if (!flip.empty()) {
    const auto colon = flip.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("--inject-sign-flip expects EQ:TERM");
    o.fault = SignFlip{std::stoi(flip.substr(0, colon)), std::stoul(flip.substr(colon + 1))};
  }
  const auto fmt = c.format.empty() ? std::string("json") : c.format;
  if (fmt != "json" && fmt != "mtx") throw std::invalid_argument("certify writes json, optionally mtx as well");
  fs::create_directories(c.out_dir);
  const auto run = run_pipeline(o);
  const auto path = fs::path(c.out_dir) / "certificate.json";
  open_out(path) << certificate_to_string(run.certificate);
  if (fmt == "mtx") {
    if (run.l0_point) {
      auto f = open_out(fs::path(c.out_dir) / "L0_point.mtx");
      write_matrix_market(f, *run.l0_point);
    }
    if (run.p_point) {
      auto f = open_out(fs::path(c.out_dir) / "P_point.mtx");
      write_matrix_market(f, *run.p_point);
    }
  }
  print_checks(run.certificate);
  const auto& br = run.certificate.over_square_rank;
  for (std::size_t k = 0; k < br.ranks_mod_p.size(); ++k)
    std::cout << "block " << br.size << "x" << br.size << ": rank mod " << br.primes[k] << " = " << br.ranks_mod_p[k]
              << '\n';
  std::cout << "wrote " << path.string() << '\n';
  return run.certificate.pass ? 0 : 1;
}

int cmd_spy(const Common& c, const std::string& which, const std::string& input) {
  fs::create_directories(c.out_dir);
  RatMatrix m;
  std::string name = which, title;
  if (!input.empty()) {
    std::ifstream in(input);
    if (!in) throw std::runtime_error("cannot read " + input);
    m = read_matrix_market(in);
    name = fs::path(input).stem().string();
    title = name;
  } else {
    auto o = pipeline_options(c);
    o.certify_rank = false;
    o.hash_polymtx = false;
    auto run = run_pipeline(o);
    if (which == "L0") {
      m = std::move(*run.l0_point);
      title = "L0 at the point";
    } else if (which == "P") {
      if (!run.p_point) throw std::runtime_error("no final block P");
      m = std::move(*run.p_point);
      title = "P at the point";
    } else {
      throw std::invalid_argument("--which must be L0 or P");
    }
  }
  title += " (" + std::to_string(m.nrows()) + "x" + std::to_string(m.ncols()) + ")";
  const auto svg = fs::path(c.out_dir) / ("spy_" + name + ".svg");
  const auto pgm = fs::path(c.out_dir) / ("spy_" + name + ".pgm");
  {
    auto f = open_out(svg);
    write_spy_svg(f, m, title);
  }
  {
    auto f = open_out(pgm);
    write_spy_pgm(f, m);
  }
  std::cout << "wrote " << svg.string() << "\nwrote " << pgm.string() << '\n';
  return 0;
}

int cmd_dump(const Common& c, bool printed) {
  DerivationParams params;
  params.nu = parse_rational(c.nu);
  std::cout << dump_system(printed ? printed_system_literal() : build_eliminated_system(params));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Algebraic solvability certificate for the prolonged adjoint system"};
  app.require_subcommand(1);
  Common c;

  auto* counts = app.add_subcommand("counts", "print the E, F, G, H counting tables");
  counts->add_option("--levels", c.levels, "largest n in the table")->check(CLI::Range(0, 200));

  auto* build = app.add_subcommand("build", "build L0 and serialize it");
  add_build_flags(build, c);
  build->add_option("--out-dir", c.out_dir, "output directory");
  build->add_option("--format", c.format, "polymtx (symbolic), mtx (at the point) or json (stats only)")
      ->check(CLI::IsMember({"polymtx", "mtx", "json"}));

  bool no_rank = false, no_block_rank = false;
  std::string flip;
  auto* certify = app.add_subcommand("certify", "run the full certification and write certificate.json");
  add_build_flags(certify, c);
  certify->add_option("--sub-levels", c.sub_levels, "level of the sub-selected block")->check(CLI::Range(0, 40));
  certify->add_option("--prime", c.primes, "prime(s) for the modular rank, tried in order");
  certify->add_option("--out-dir", c.out_dir, "output directory");
  certify->add_option("--format", c.format, "json, or mtx to also write L0 and P at the point")
      ->check(CLI::IsMember({"polymtx", "mtx", "json"}));
  certify->add_flag("--no-rank", no_rank, "skip the exact rank stage");
  certify->add_flag("--no-block-rank", no_block_rank, "skip the rank of the block that contains P");
  certify->add_option("--matching", c.matching, "maximum matching used by the decomposition: hk or dfs")
      ->check(CLI::IsMember({"hk", "dfs"}));
  certify->add_option("--inject-sign-flip", flip, "fault injection: flip the sign of lhs term TERM of equation EQ")
      ->type_name("EQ:TERM");

  std::string which = "P", input;
  auto* spy = app.add_subcommand("spy", "nonzero pattern as SVG and PGM");
  add_build_flags(spy, c);
  spy->add_option("--sub-levels", c.sub_levels, "level of the sub-selected block");
  spy->add_option("--matching", c.matching, "maximum matching used by the decomposition: hk or dfs")
      ->check(CLI::IsMember({"hk", "dfs"}));
  spy->add_option("--which", which, "L0 or P")->check(CLI::IsMember({"L0", "P"}));
  spy->add_option("--input", input, "plot a Matrix Market file instead of running the pipeline");
  spy->add_option("--out-dir", c.out_dir, "output directory");

  bool printed = false;
  auto* dump = app.add_subcommand("dump-system", "print the three eliminated equations");
  dump->add_option("--nu", c.nu, "viscosity parameter");
  dump->add_flag("--printed", printed, "print the literal transcription of the printed system instead");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*counts) return cmd_counts(c);
    if (*build) return cmd_build(c);
    if (*certify) {
      if (c.format == "polymtx") throw std::invalid_argument("certify does not write polymtx; use build");
      return cmd_certify(c, no_rank, no_block_rank, flip);
    }
    if (*spy) return cmd_spy(c, which, input);
    if (*dump) return cmd_dump(c, printed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
