#include "cmes/cli.hpp"

#include "cmes/benchmarks.hpp"
#include "cmes/bo_loop.hpp"
#include "cmes/errors.hpp"
#include "cmes/session.hpp"
#include "cmes/validation.hpp"

#include "CLI11.hpp"

#include <omp.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace cmes {

namespace {

namespace fs = std::filesystem;

std::string output_dir() {
  const char* env = std::getenv(kOutputDirEnv);
  return env && *env ? std::string(env) : std::string(".");
}

std::string default_path(const std::string& file) {
  const fs::path dir(output_dir());
  fs::create_directories(dir);
  return (dir / file).string();
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ':' || c == '/' || c == ' ') c = '_';
  return s;
}

void write_points(const Eigen::MatrixXd& pts, std::ostream& out) {
  for (Eigen::Index i = 0; i < pts.cols(); ++i) out << (i ? "," : "") << 'x' << (i + 1);
  out << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < pts.rows(); ++r) {
    for (Eigen::Index i = 0; i < pts.cols(); ++i) out << (i ? "," : "") << pts(r, i);
    out << '\n';
  }
}

// Rows of comma-separated numbers; blank lines and lines starting with a letter or '#' are skipped.
Eigen::MatrixXd read_rows(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#' || std::isalpha(static_cast<unsigned char>(line[first])))
      continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw std::invalid_argument("not a number in values file: '" + cell + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  const std::size_t width = rows.empty() ? 0 : rows[0].size();
  Eigen::MatrixXd m(rows.size(), width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) throw std::invalid_argument("values file rows differ in length");
    for (std::size_t c = 0; c < width; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

void print_recommendation(const Recommendation& rec, const std::optional<double>& gap, std::ostream& out) {
  out << "recommendation" << std::setprecision(17);
  for (Eigen::Index i = 0; i < rec.point.size(); ++i) out << (i ? "," : " ") << rec.point(i);
  out << " feasible_by_rule=" << (rec.feasible_by_rule ? 1 : 0) << " predicted_mean=" << rec.predicted_mean;
  if (gap) out << " utility_gap=" << *gap;
  out << '\n';
}

struct RunOptions {
  std::string problem;
  std::string problem_file;
  std::string method = "cmes-ibo";
  int iters = 50;
  int batch = 1;
  std::uint64_t seed = 0;
  int K = 10;
  int n_init = 0;
  int rff = kDefaultRffFeatures;
  int threads = 0;
  bool serial = false;
  std::string out;
  std::string session;
};

BoConfig make_config(const RunOptions& o) {
  BoConfig c;
  c.method = parse_method(o.method);
  c.T = o.iters;
  c.Q = o.batch;
  c.seed = o.seed;
  c.K = o.K;
  c.n_init = o.n_init;
  c.rff_features = o.rff;
  c.exec = o.serial ? Exec::Serial : Exec::Parallel;
  c.validate();
  return c;
}

void add_common(CLI::App* sub, RunOptions& o) {
  sub->add_option("--method", o.method, "cmes-ibo, cmes, eic, tsc or random")->capture_default_str();
  sub->add_option("--batch", o.batch, "points per iteration (Q)")->capture_default_str();
  sub->add_option("--seed", o.seed, "master seed")->capture_default_str();
  sub->add_option("--k", o.K, "max-value samples per iteration")->capture_default_str();
  sub->add_option("--n-init", o.n_init, "initial design size (0: problem default)")->capture_default_str();
  sub->add_option("--rff", o.rff, "random Fourier features per function")->capture_default_str();
  sub->add_option("--threads", o.threads, "OpenMP threads (0: runtime default)");
  sub->add_flag("--serial", o.serial, "evaluate without OpenMP");
}

int cmd_run(const RunOptions& o, std::ostream& out, std::ostream& err) {
  const Problem problem = problem_by_name(o.problem);
  BoConfig cfg = make_config(o);
  const std::string stem = sanitize(problem.name) + "_" + o.method + "_s" + std::to_string(o.seed);
  const std::string trace_path = o.out.empty() ? default_path(stem + ".csv") : o.out;
  const std::string session_path =
      o.session.empty() ? (fs::path(trace_path).replace_extension(".json")).string() : o.session;
  ensure_parent(trace_path);
  ensure_parent(session_path);

  const RunResult r = run(problem, cfg);
  write_trace_csv(r.trace, problem.dim(), cfg.Q, trace_path);
  BoConfig saved = cfg;
  if (saved.n_init == 0) saved.n_init = problem.default_n_init;
  save_session(SessionState{ProblemDescriptor::from_problem(problem), true, saved, r.state}, session_path);
  out << "trace " << trace_path << "\nsession " << session_path << '\n';
  if (!r.trace.empty()) print_recommendation(r.trace.back().recommendation, r.trace.back().utility_gap, out);
  if (!r.completed) {
    err << "run aborted: " << r.error << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_init(const RunOptions& o, std::ostream& out) {
  if (o.session.empty()) throw std::invalid_argument("init needs --session");
  if (o.problem.empty() == o.problem_file.empty())
    throw std::invalid_argument("init needs exactly one of --problem and --problem-file");
  BoConfig cfg = make_config(o);
  std::optional<Problem> scorer;
  ProblemDescriptor desc;
  const bool builtin = !o.problem.empty();
  if (builtin) {
    scorer = problem_by_name(o.problem);
    desc = ProblemDescriptor::from_problem(*scorer);
  } else {
    desc = load_problem_descriptor(o.problem_file);
  }
  const Optimizer opt(desc, cfg, scorer);
  ensure_parent(o.session);
  save_session(capture_session(opt, builtin), o.session);
  out << "session " << o.session << '\n';
  return kExitOk;
}

int cmd_ask(const std::string& session, const std::string& points_out, std::ostream& out) {
  const SessionState s = load_session(session);
  Optimizer opt = make_optimizer(s);
  const Eigen::MatrixXd pts = opt.ask();
  save_session(capture_session(opt, s.builtin), session);
  if (points_out.empty()) {
    write_points(pts, out);
  } else {
    ensure_parent(points_out);
    std::ofstream f(points_out);
    if (!f) throw std::runtime_error("cannot write " + points_out);
    write_points(pts, f);
    out << "points " << points_out << '\n';
  }
  return kExitOk;
}

int cmd_tell(const std::string& session, const std::string& values, const std::string& trace_out, std::ostream& out) {
  const SessionState s = load_session(session);
  Optimizer opt = make_optimizer(s);
  std::ifstream in(values);
  if (!in) throw std::invalid_argument("cannot read values file " + values);
  const Eigen::MatrixXd y = read_rows(in);
  const TraceRow& row = opt.tell(y);
  save_session(capture_session(opt, s.builtin), session);
  if (!trace_out.empty()) {
    ensure_parent(trace_out);
    write_trace_csv(opt.state().trace, opt.descriptor().domain.dim(), opt.config().Q, trace_out);
  }
  print_recommendation(row.recommendation, row.utility_gap, out);
  return kExitOk;
}

int cmd_recommend(const std::string& session, std::ostream& out) {
  const SessionState s = load_session(session);
  const Optimizer opt = make_optimizer(s);
  const Recommendation rec = opt.current_recommendation();
  std::optional<double> gap;
  if (s.builtin) {
    const Problem p = problem_by_name(s.descriptor.name);
    if (p.ground_truth) gap = utility_gap(p, rec);
  }
  print_recommendation(rec, gap, out);
  return kExitOk;
}

struct DemoOptions {
  std::vector<int> C{4, 5, 6, 7};
  std::uint64_t seed = 3;
  int K = 100;
  int n_outer = 500;
  int n_inner = 2000;
  bool no_kde = false;
  std::string out_dir;
};

int cmd_demo(const DemoOptions& o, std::ostream& out) {
  NegativityConfig cfg;
  cfg.K = o.K;
  cfg.seed = o.seed;
  cfg.with_kde = !o.no_kde;
  cfg.kde.n_outer = o.n_outer;
  cfg.kde.n_inner = o.n_inner;
  cfg.kde.seed = o.seed;
  const NegativityReport rep = demo_negativity(o.C, cfg);
  const std::string dir = o.out_dir.empty() ? output_dir() : o.out_dir;
  fs::create_directories(dir);
  const ToyState toy = make_toy_state(0);
  for (const NegativityCurve& cv : rep.curves) {
    const std::string path = (fs::path(dir) / ("negativity_C" + std::to_string(cv.C) + ".csv")).string();
    write_negativity_csv(cv, toy.grid, path);
    out << "curve " << path << '\n';
  }
  for (const std::string& l : rep.lines) out << l << '\n';
  out << (rep.pass ? "demo-negativity: PASS" : "demo-negativity: FAIL") << '\n';
  return rep.pass ? kExitOk : kExitValidation;
}

struct ValidateOptions {
  std::uint64_t seed = 0;
  int samples = 100000;
  int replicates = 10000;
  int n_outer = 500;
  int n_inner = 2000;
  int C = 6;
};

int cmd_validate(const ValidateOptions& o, std::ostream& out) {
  bool pass = true;
  const AGammaReport ag = check_a_gamma();
  out << std::setprecision(10) << "a(0)=" << ag.a_zero << " a(-0.84)=" << ag.a_minus_084 << " a(-30)=" << ag.a_minus_30
      << (ag.pass ? " ok" : " FAILED") << '\n';
  pass = pass && ag.pass;

  const ToyState toy = make_toy_state(o.C);
  Eigen::MatrixXd xs(5, 1);
  for (int i = 0; i < 5; ++i) xs(i, 0) = toy.grid(std::array<int, 5>{20, 70, 99, 130, 180}[i], 0);
  TheoremConfig tc;
  tc.seed = o.seed;
  tc.n_samples = o.samples;
  tc.n_replicates = o.replicates;
  const TheoremReport tr = check_theorem_bounds(toy.bundle, toy.grid, xs, tc);
  for (const TheoremPointResult& p : tr.points)
    out << "x=" << p.x(0) << " var(-log Zb)=" << p.variance << " mean=" << p.mean << '\n';
  for (const std::string& v : tr.violations) out << "violation: " << v << '\n';
  out << "variance bound " << (tr.variance_ok ? "ok" : "FAILED") << ", concentration "
      << (tr.concentration_ok ? "ok" : "FAILED") << '\n';
  pass = pass && tr.variance_ok && tr.concentration_ok;

  NegativityConfig nc;
  nc.seed = o.seed;
  nc.kde.n_outer = o.n_outer;
  nc.kde.n_inner = o.n_inner;
  nc.kde.seed = o.seed;
  const NegativityReport nr = demo_negativity({o.C}, nc);
  for (const std::string& l : nr.lines) out << l << '\n';
  pass = pass && nr.pass;
  out << (pass ? "validate: PASS" : "validate: FAIL") << '\n';
  return pass ? kExitOk : kExitValidation;
}

int cmd_list(std::ostream& out) {
  for (const std::string& n : problem_names()) out << n << '\n';
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Constrained Bayesian optimisation with CMES-IBO"};
  app.require_subcommand(1);

  RunOptions run_o;
  CLI::App* run_cmd = app.add_subcommand("run", "run a benchmark end to end");
  run_cmd->add_option("--problem", run_o.problem, "built-in problem name")->required();
  run_cmd->add_option("--iters", run_o.iters, "iterations after the initial design")->capture_default_str();
  run_cmd->add_option("--out", run_o.out, "trace CSV path");
  run_cmd->add_option("--session", run_o.session, "session JSON path (default: next to the trace)");
  add_common(run_cmd, run_o);

  RunOptions init_o;
  CLI::App* init_cmd = app.add_subcommand("init", "create an ask/tell session");
  init_cmd->add_option("--problem", init_o.problem, "built-in problem name");
  init_cmd->add_option("--problem-file", init_o.problem_file, "problem descriptor JSON");
  init_cmd->add_option("--session", init_o.session, "session JSON path")->required();
  add_common(init_cmd, init_o);

  std::string session, points_out, values, trace_out;
  std::uint64_t unused_seed = 0;
  CLI::App* ask_cmd = app.add_subcommand("ask", "emit the next batch and mark it pending");
  ask_cmd->add_option("--session", session, "session JSON path")->required();
  ask_cmd->add_option("--out", points_out, "write points to this CSV instead of stdout");
  ask_cmd->add_option("--seed", unused_seed, "ignored; the session carries its seed");
  CLI::App* tell_cmd = app.add_subcommand("tell", "ingest outputs for the pending batch");
  tell_cmd->add_option("--session", session, "session JSON path")->required();
  tell_cmd->add_option("--values", values, "CSV rows: f, g_1, ..., g_C per pending point")->required();
  tell_cmd->add_option("--trace", trace_out, "write the trace CSV here");
  tell_cmd->add_option("--seed", unused_seed, "ignored; the session carries its seed");
  CLI::App* rec_cmd = app.add_subcommand("recommend", "print the current recommendation");
  rec_cmd->add_option("--session", session, "session JSON path")->required();
  rec_cmd->add_option("--seed", unused_seed, "ignored; the session carries its seed");

  DemoOptions demo_o;
  CLI::App* demo_cmd = app.add_subcommand("demo-negativity", "CMES negativity demonstration on the toy state");
  demo_cmd->add_option("--C", demo_o.C, "constraint counts from {4,5,6,7}")->delimiter(',')->capture_default_str();
  demo_cmd->add_option("--seed", demo_o.seed)->capture_default_str();
  demo_cmd->add_option("--k", demo_o.K)->capture_default_str();
  demo_cmd->add_option("--n-outer", demo_o.n_outer)->capture_default_str();
  demo_cmd->add_option("--n-inner", demo_o.n_inner)->capture_default_str();
  demo_cmd->add_flag("--no-kde", demo_o.no_kde, "skip the KDE-MI oracle");
  demo_cmd->add_option("--out-dir", demo_o.out_dir, "directory for the curve CSVs");

  ValidateOptions val_o;
  CLI::App* val_cmd = app.add_subcommand("validate", "a(gamma), variance/concentration bounds and KDE-MI agreement");
  val_cmd->add_option("--seed", val_o.seed)->capture_default_str();
  val_cmd->add_option("--samples", val_o.samples)->capture_default_str();
  val_cmd->add_option("--replicates", val_o.replicates)->capture_default_str();
  val_cmd->add_option("--n-outer", val_o.n_outer)->capture_default_str();
  val_cmd->add_option("--n-inner", val_o.n_inner)->capture_default_str();

  CLI::App* list_cmd = app.add_subcommand("list-problems", "print built-in problem names");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (run_cmd->parsed() || init_cmd->parsed()) {
      const RunOptions& o = run_cmd->parsed() ? run_o : init_o;
      if (o.threads > 0) omp_set_num_threads(o.threads);
      return run_cmd->parsed() ? cmd_run(o, out, err) : cmd_init(o, out);
    }
    if (ask_cmd->parsed()) return cmd_ask(session, points_out, out);
    if (tell_cmd->parsed()) return cmd_tell(session, values, trace_out, out);
    if (rec_cmd->parsed()) return cmd_recommend(session, out);
    if (demo_cmd->parsed()) return cmd_demo(demo_o, out);
    if (val_cmd->parsed()) return cmd_validate(val_o, out);
    if (list_cmd->parsed()) return cmd_list(out);
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const StateError& e) {
    err << "state error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace cmes
