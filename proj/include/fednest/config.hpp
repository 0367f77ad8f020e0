#pragma once

// Run configuration: one JSON document describing the algorithm, the problem
// instance, the schedule, and the output plumbing.
//
// The document is strict: every key must be known (unknown keys are rejected
// by name), and a fully resolved config echoes back out with every field
// explicit, so reloading an echo reproduces the identical run. The "problem"
// key names a preset; the preset picks the problem family, its instance
// defaults, and (for the experiment presets) schedule defaults. Any nested
// block then overrides individual fields. Presets:
//   minimax-quadratic      saddle instance, library defaults
//   bilevel-quadratic      nested quadratic, library defaults
//   compositional          inner-as-tracking compositional instance
//   single-level           plain federated averaging objective
//   heterogeneous-bilevel  the pronounced client-heterogeneity preset
//   paper-h                the reported experiment shape: saddle instance run
//                          through the full nested machinery, 100 clients
//                          with 10 sampled per epoch, N=5, T=1, 5 local
//                          inner steps, 1 local outer step

#include <cstdint>
#include <memory>
#include <string>

#include "fednest/engine.hpp"
#include "fednest/problems.hpp"
#include "fednest/schedule.hpp"

namespace fednest {

enum class ProblemFamily { minimax_quadratic, bilevel_quadratic, compositional, single_level };

std::string to_string(ProblemFamily f);

struct RunConfig {
    VariantKind algorithm = VariantKind::fednest;
    std::string problem = "minimax-quadratic";  // preset name as given
    ProblemFamily family = ProblemFamily::minimax_quadratic;
    // Exactly one of these is active, selected by `family`.
    MinimaxQuadraticSpec minimax;
    BilevelQuadraticSpec bilevel;
    CompositionalSpec compositional;
    SingleLevelSpec single_level;
    ScheduleConfig schedule;
    std::uint64_t seed = 1;
    std::size_t metric_stride = 1;
    std::string out_csv;   // empty = decided by the caller
    std::string out_json;  // empty = decided by the caller
};

// Defaults for a named preset. Throws ValidationError on an unknown name.
RunConfig config_from_preset(const std::string& problem_name);

// Parse + validate a config document. `origin` labels error messages.
// Throws ValidationError on parse errors (with position), unknown keys
// (named), wrong types, and invariant violations.
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");

// Read the file at `path` and parse it. Throws ValidationError if unreadable.
RunConfig load_config(const std::string& path);

// Fully explicit JSON echo of a resolved config. parse_config_text of the
// result reproduces `cfg` exactly.
std::string config_to_text(const RunConfig& cfg);

// Instantiate the active problem spec.
ProblemPtr make_problem(const RunConfig& cfg);

}  // namespace fednest
