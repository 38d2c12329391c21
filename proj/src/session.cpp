#include "cmes/session.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace cmes {

using nlohmann::ordered_json;

namespace {

ordered_json vec_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

ordered_json mat_json(const Eigen::MatrixXd& m) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r).transpose()));
  return a;
}

Eigen::VectorXd json_vec(const ordered_json& a) {
  if (!a.is_array()) throw std::invalid_argument("expected a JSON array of numbers");
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v(i) = a[i].get<double>();
  return v;
}

Eigen::MatrixXd json_mat(const ordered_json& a, Eigen::Index cols) {
  if (!a.is_array()) throw std::invalid_argument("expected a JSON array of rows");
  Eigen::MatrixXd m(a.size(), cols);
  for (std::size_t r = 0; r < a.size(); ++r) {
    const Eigen::VectorXd row = json_vec(a[r]);
    if (row.size() != cols) throw std::invalid_argument("matrix row has the wrong length");
    m.row(r) = row.transpose();
  }
  return m;
}

ordered_json kernel_json(const KernelSpec& k) {
  return ordered_json{{"sigma2_lin", k.sigma2_lin}, {"sigma2_rbf", k.sigma2_rbf}, {"lengthscales", vec_json(k.lengthscales)}};
}

KernelSpec json_kernel(const ordered_json& j) {
  KernelSpec k{j.at("sigma2_lin").get<double>(), j.at("sigma2_rbf").get<double>(), json_vec(j.at("lengthscales"))};
  k.validate();
  return k;
}

ordered_json config_json(const BoConfig& c) {
  return ordered_json{
      {"method", method_name(c.method)},
      {"K", c.K},
      {"Q", c.Q},
      {"T", c.T},
      {"n_init", c.n_init},
      {"rff_features", c.rff_features},
      {"refit_period", c.refit_period},
      {"seed", c.seed},
      {"feasibility_confidence", c.feasibility_confidence},
      {"recommend_grid", c.recommend_grid},
      {"recommend_pool", c.recommend_pool},
      {"acq_opt",
       {{"grid_1d", c.acq_opt.grid_1d},
        {"grid_2d", c.acq_opt.grid_2d},
        {"restarts", c.acq_opt.restarts},
        {"pool", c.acq_opt.pool},
        {"refine_evals", c.acq_opt.refine_evals},
        {"min_step", c.acq_opt.min_step}}},
      {"solver",
       {{"restarts", c.solver.restarts},
        {"pool", c.solver.pool},
        {"max_steps", c.solver.max_steps},
        {"feasibility_tolerance", c.solver.feasibility_tolerance}}},
  };
}

BoConfig json_config(const ordered_json& j) {
  BoConfig c;
  c.method = parse_method(j.at("method").get<std::string>());
  c.K = j.at("K").get<int>();
  c.Q = j.at("Q").get<int>();
  c.T = j.at("T").get<int>();
  c.n_init = j.at("n_init").get<int>();
  c.rff_features = j.at("rff_features").get<int>();
  c.refit_period = j.at("refit_period").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.feasibility_confidence = j.at("feasibility_confidence").get<double>();
  c.recommend_grid = j.at("recommend_grid").get<int>();
  c.recommend_pool = j.at("recommend_pool").get<int>();
  const ordered_json& a = j.at("acq_opt");
  c.acq_opt.grid_1d = a.at("grid_1d").get<int>();
  c.acq_opt.grid_2d = a.at("grid_2d").get<int>();
  c.acq_opt.restarts = a.at("restarts").get<int>();
  c.acq_opt.pool = a.at("pool").get<int>();
  c.acq_opt.refine_evals = a.at("refine_evals").get<int>();
  c.acq_opt.min_step = a.at("min_step").get<double>();
  const ordered_json& s = j.at("solver");
  c.solver.restarts = s.at("restarts").get<int>();
  c.solver.pool = s.at("pool").get<int>();
  c.solver.max_steps = s.at("max_steps").get<int>();
  c.solver.feasibility_tolerance = s.at("feasibility_tolerance").get<double>();
  c.validate();
  return c;
}

ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::optional<double> json_optional(const ordered_json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

ordered_json session_to_json(const SessionState& s) {
  const ProblemDescriptor& d = s.descriptor;
  ordered_json trace = ordered_json::array();
  for (const TraceRow& r : s.state.trace) {
    trace.push_back({{"iteration", r.iteration},
                     {"queries", mat_json(r.queries)},
                     {"recommendation", vec_json(r.recommendation.point)},
                     {"feasible_by_rule", r.recommendation.feasible_by_rule},
                     {"predicted_mean", r.recommendation.predicted_mean},
                     {"utility_gap", optional_json(r.utility_gap)},
                     {"best_observed_gap", optional_json(r.best_observed_gap)}});
  }
  ordered_json kernels = ordered_json::array();
  for (const KernelSpec& k : s.state.kernels) kernels.push_back(kernel_json(k));
  return ordered_json{
      {"format_version", kSessionFormatVersion},
      {"problem",
       {{"name", d.name},
        {"builtin", s.builtin},
        {"lower", vec_json(d.domain.lower)},
        {"upper", vec_json(d.domain.upper)},
        {"thresholds", d.thresholds},
        {"n_init", d.n_init}}},
      {"config", config_json(s.config)},
      {"state",
       {{"iteration", s.state.iteration},
        {"inputs", mat_json(s.state.inputs)},
        {"outputs", mat_json(s.state.outputs)},
        {"kernels", kernels},
        {"pending", s.state.pending ? mat_json(*s.state.pending) : ordered_json(nullptr)},
        {"warnings", s.state.warnings},
        {"trace", trace}}},
  };
}

SessionState session_from_json(const ordered_json& j) {
  if (!j.contains("format_version")) throw std::invalid_argument("session file has no format_version");
  const int version = j.at("format_version").get<int>();
  if (version != kSessionFormatVersion)
    throw std::invalid_argument("unsupported session format version " + std::to_string(version));
  SessionState s;
  const ordered_json& p = j.at("problem");
  s.descriptor.name = p.at("name").get<std::string>();
  s.builtin = p.at("builtin").get<bool>();
  s.descriptor.domain = Box(json_vec(p.at("lower")), json_vec(p.at("upper")));
  s.descriptor.thresholds = p.at("thresholds").get<std::vector<double>>();
  s.descriptor.n_init = p.at("n_init").get<int>();
  s.config = json_config(j.at("config"));

  const ordered_json& st = j.at("state");
  const Eigen::Index d = s.descriptor.domain.dim();
  const Eigen::Index w = static_cast<Eigen::Index>(s.descriptor.num_constraints()) + 1;
  s.state.iteration = st.at("iteration").get<int>();
  s.state.inputs = json_mat(st.at("inputs"), d);
  s.state.outputs = json_mat(st.at("outputs"), w);
  if (s.state.inputs.rows() != s.state.outputs.rows()) throw std::invalid_argument("session inputs and outputs differ in length");
  for (const ordered_json& k : st.at("kernels")) s.state.kernels.push_back(json_kernel(k));
  if (!st.at("pending").is_null()) s.state.pending = json_mat(st.at("pending"), d);
  s.state.warnings = st.at("warnings").get<std::vector<std::string>>();
  for (const ordered_json& r : st.at("trace")) {
    TraceRow row;
    row.iteration = r.at("iteration").get<int>();
    row.queries = json_mat(r.at("queries"), d);
    row.recommendation.point = json_vec(r.at("recommendation"));
    row.recommendation.feasible_by_rule = r.at("feasible_by_rule").get<bool>();
    row.recommendation.predicted_mean = r.at("predicted_mean").get<double>();
    row.utility_gap = json_optional(r.at("utility_gap"));
    row.best_observed_gap = json_optional(r.at("best_observed_gap"));
    s.state.trace.push_back(std::move(row));
  }
  return s;
}

void save_session(const SessionState& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write session file " + path);
  out << session_to_json(s).dump(2) << '\n';
}

SessionState load_session(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read session file " + path);
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed session file " + path + ": " + e.what());
  }
  try {
    return session_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed session file " + path + ": " + e.what());
  }
}

Optimizer make_optimizer(const SessionState& s) {
  std::optional<Problem> scorer;
  if (s.builtin) scorer = problem_by_name(s.descriptor.name);
  return Optimizer(s.descriptor, s.config, s.state, std::move(scorer));
}

SessionState capture_session(const Optimizer& opt, bool builtin) {
  return SessionState{opt.descriptor(), builtin, opt.config(), opt.state()};
}

ProblemDescriptor load_problem_descriptor(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read problem file " + path);
  try {
    const ordered_json j = ordered_json::parse(in);
    ProblemDescriptor d;
    d.name = j.at("name").get<std::string>();
    d.domain = Box(json_vec(j.at("lower")), json_vec(j.at("upper")));
    d.thresholds = j.at("thresholds").get<std::vector<double>>();
    d.n_init = j.value("n_init", 5);
    if (d.n_init < 1) throw std::invalid_argument("n_init must be positive");
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed problem file " + path + ": " + e.what());
  }
}

void write_trace_csv(const UtilityGapTrace& trace, int dim, int batch, std::ostream& out) {
  out << "iteration";
  for (int q = 1; q <= batch; ++q)
    for (int i = 1; i <= dim; ++i) out << ",x" << i << "_q" << q;
  for (int i = 1; i <= dim; ++i) out << ",rec_x" << i;
  out << ",utility_gap,best_observed_gap,feasible_flag\n";
  out << std::setprecision(17);
  for (const TraceRow& r : trace) {
    out << r.iteration;
    for (int q = 0; q < batch; ++q)
      for (int i = 0; i < dim; ++i) {
        out << ',';
        if (q < r.queries.rows()) out << r.queries(q, i);
      }
    for (int i = 0; i < dim; ++i) out << ',' << r.recommendation.point(i);
    out << ',';
    if (r.utility_gap) out << *r.utility_gap;
    out << ',';
    if (r.best_observed_gap) out << *r.best_observed_gap;
    out << ',' << (r.recommendation.feasible_by_rule ? 1 : 0) << '\n';
  }
}

void write_trace_csv(const UtilityGapTrace& trace, int dim, int batch, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file " + path);
  write_trace_csv(trace, dim, batch, out);
}

}  // namespace cmes
