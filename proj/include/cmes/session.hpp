#pragma once

#include "cmes/bo_loop.hpp"

#include "json.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace cmes {

inline constexpr int kSessionFormatVersion = 1;

// Everything needed to resume an optimisation: problem descriptor, configuration and
// optimizer state. Built-in problems are re-created by name so gaps can be scored.
struct SessionState {
  ProblemDescriptor descriptor;
  bool builtin = false;
  BoConfig config;
  Optimizer::State state;
};

nlohmann::ordered_json session_to_json(const SessionState& s);
// Throws invalid_argument on a missing or unsupported format version or malformed fields.
SessionState session_from_json(const nlohmann::ordered_json& j);

void save_session(const SessionState& s, const std::string& path);
SessionState load_session(const std::string& path);

// Optimizer for a session; built-in problems get their scorer back.
Optimizer make_optimizer(const SessionState& s);
SessionState capture_session(const Optimizer& opt, bool builtin);

// Declarative problem file: {"name", "lower", "upper", "thresholds", optional "n_init"}.
ProblemDescriptor load_problem_descriptor(const std::string& path);

// Header: iteration, x{i}_q{j}..., rec_x{i}..., utility_gap, best_observed_gap, feasible_flag.
void write_trace_csv(const UtilityGapTrace& trace, int dim, int batch, std::ostream& out);
void write_trace_csv(const UtilityGapTrace& trace, int dim, int batch, const std::string& path);

}  // namespace cmes
