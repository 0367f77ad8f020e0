#include "fednest/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "fednest/errors.hpp"
#include "json.hpp"

namespace fednest {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ValidationError("config: " + msg); }

// Wraps one JSON object and tracks which keys were consumed, so anything
// left over can be rejected by name.
class StrictObject {
public:
    StrictObject(const json& j, std::string where) : where_(std::move(where)) {
        if (!j.is_object()) fail(where_ + ": expected an object");
        for (auto it = j.begin(); it != j.end(); ++it) pending_.insert(it.key());
        obj_ = &j;
    }

    const json* take(const std::string& key) {
        auto it = obj_->find(key);
        if (it == obj_->end()) return nullptr;
        pending_.erase(key);
        return &*it;
    }

    void finish() const {
        if (pending_.empty()) return;
        fail("unknown key \"" + *pending_.begin() + "\" in " + where_);
    }

    const std::string& where() const { return where_; }

private:
    const json* obj_ = nullptr;
    std::set<std::string> pending_;
    std::string where_;
};

double read_double(const json& v, const std::string& where) {
    if (!v.is_number()) fail(where + ": expected a number");
    return v.get<double>();
}

std::size_t read_size(const json& v, const std::string& where) {
    if (!(v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0)))
        fail(where + ": expected a nonnegative integer");
    return v.get<std::size_t>();
}

std::uint64_t read_u64(const json& v, const std::string& where) {
    if (!(v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0)))
        fail(where + ": expected a nonnegative integer");
    return v.get<std::uint64_t>();
}

bool read_bool(const json& v, const std::string& where) {
    if (!v.is_boolean()) fail(where + ": expected a boolean");
    return v.get<bool>();
}

std::string read_string(const json& v, const std::string& where) {
    if (!v.is_string()) fail(where + ": expected a string");
    return v.get<std::string>();
}

void apply_noise(const json& j, const std::string& where, NoiseLevels& n) {
    StrictObject obj(j, where);
    if (const json* v = obj.take("sigma_f")) n.sigma_f = read_double(*v, where + ".sigma_f");
    if (const json* v = obj.take("sigma_g1")) n.sigma_g1 = read_double(*v, where + ".sigma_g1");
    if (const json* v = obj.take("sigma_g2")) n.sigma_g2 = read_double(*v, where + ".sigma_g2");
    obj.finish();
}

void apply_minimax(const json& j, MinimaxQuadraticSpec& s) {
    const std::string w = "\"minimax_quadratic\"";
    StrictObject obj(j, w);
    if (const json* v = obj.take("m")) s.m = read_size(*v, w + ".m");
    if (const json* v = obj.take("d")) s.d = read_size(*v, w + ".d");
    if (const json* v = obj.take("lambda")) s.lambda = read_double(*v, w + ".lambda");
    if (const json* v = obj.take("s")) s.s = read_double(*v, w + ".s");
    if (const json* v = obj.take("t_max")) s.t_max = read_double(*v, w + ".t_max");
    if (const json* v = obj.take("r_op")) s.r_op = read_double(*v, w + ".r_op");
    if (const json* v = obj.take("init_scale")) s.init_scale = read_double(*v, w + ".init_scale");
    if (const json* v = obj.take("seed")) s.seed = read_u64(*v, w + ".seed");
    if (const json* v = obj.take("as_bilevel")) s.as_bilevel = read_bool(*v, w + ".as_bilevel");
    if (const json* v = obj.take("noise")) apply_noise(*v, w + ".noise", s.noise);
    obj.finish();
}

void apply_bilevel(const json& j, BilevelQuadraticSpec& s) {
    const std::string w = "\"bilevel_quadratic\"";
    StrictObject obj(j, w);
    if (const json* v = obj.take("m")) s.m = read_size(*v, w + ".m");
    if (const json* v = obj.take("d1")) s.d1 = read_size(*v, w + ".d1");
    if (const json* v = obj.take("d2")) s.d2 = read_size(*v, w + ".d2");
    if (const json* v = obj.take("eig_min")) s.eig_min = read_double(*v, w + ".eig_min");
    if (const json* v = obj.take("eig_max")) s.eig_max = read_double(*v, w + ".eig_max");
    if (const json* v = obj.take("cross_scale")) s.cross_scale = read_double(*v, w + ".cross_scale");
    if (const json* v = obj.take("cross_hetero"))
        s.cross_hetero = read_double(*v, w + ".cross_hetero");
    if (const json* v = obj.take("c_spread")) s.c_spread = read_double(*v, w + ".c_spread");
    if (const json* v = obj.take("a_spread")) s.a_spread = read_double(*v, w + ".a_spread");
    if (const json* v = obj.take("u_spread")) s.u_spread = read_double(*v, w + ".u_spread");
    if (const json* v = obj.take("rho")) s.rho = read_double(*v, w + ".rho");
    if (const json* v = obj.take("r_op")) s.r_op = read_double(*v, w + ".r_op");
    if (const json* v = obj.take("init_scale")) s.init_scale = read_double(*v, w + ".init_scale");
    if (const json* v = obj.take("seed")) s.seed = read_u64(*v, w + ".seed");
    if (const json* v = obj.take("noise")) apply_noise(*v, w + ".noise", s.noise);
    obj.finish();
}

void apply_compositional(const json& j, CompositionalSpec& s) {
    const std::string w = "\"compositional\"";
    StrictObject obj(j, w);
    if (const json* v = obj.take("m")) s.m = read_size(*v, w + ".m");
    if (const json* v = obj.take("d1")) s.d1 = read_size(*v, w + ".d1");
    if (const json* v = obj.take("d2")) s.d2 = read_size(*v, w + ".d2");
    if (const json* v = obj.take("map_scale")) s.map_scale = read_double(*v, w + ".map_scale");
    if (const json* v = obj.take("v_spread")) s.v_spread = read_double(*v, w + ".v_spread");
    if (const json* v = obj.take("w_spread")) s.w_spread = read_double(*v, w + ".w_spread");
    if (const json* v = obj.take("r_op")) s.r_op = read_double(*v, w + ".r_op");
    if (const json* v = obj.take("init_scale")) s.init_scale = read_double(*v, w + ".init_scale");
    if (const json* v = obj.take("seed")) s.seed = read_u64(*v, w + ".seed");
    if (const json* v = obj.take("noise")) apply_noise(*v, w + ".noise", s.noise);
    obj.finish();
}

void apply_single_level(const json& j, SingleLevelSpec& s) {
    const std::string w = "\"single_level\"";
    StrictObject obj(j, w);
    if (const json* v = obj.take("m")) s.m = read_size(*v, w + ".m");
    if (const json* v = obj.take("d")) s.d = read_size(*v, w + ".d");
    if (const json* v = obj.take("u_spread")) s.u_spread = read_double(*v, w + ".u_spread");
    if (const json* v = obj.take("r_op")) s.r_op = read_double(*v, w + ".r_op");
    if (const json* v = obj.take("init_scale")) s.init_scale = read_double(*v, w + ".init_scale");
    if (const json* v = obj.take("seed")) s.seed = read_u64(*v, w + ".seed");
    if (const json* v = obj.take("noise")) apply_noise(*v, w + ".noise", s.noise);
    obj.finish();
}

void apply_schedule(const json& j, ScheduleConfig& s) {
    const std::string w = "\"schedule\"";
    StrictObject obj(j, w);
    if (const json* v = obj.take("K")) s.K = read_size(*v, w + ".K");
    if (const json* v = obj.take("T")) s.T = read_size(*v, w + ".T");
    if (const json* v = obj.take("N")) s.N = read_size(*v, w + ".N");
    if (const json* v = obj.take("tau_inner")) s.tau_inner = read_size(*v, w + ".tau_inner");
    if (const json* v = obj.take("tau_outer")) s.tau_outer = read_size(*v, w + ".tau_outer");
    if (const json* v = obj.take("mode")) {
        const std::string name = read_string(*v, w + ".mode");
        if (name == "manual")
            s.mode = ScheduleMode::manual;
        else if (name == "theory")
            s.mode = ScheduleMode::theory;
        else
            fail(w + ".mode: expected \"manual\" or \"theory\", got \"" + name + "\"");
    }
    if (const json* v = obj.take("alpha")) s.alpha = read_double(*v, w + ".alpha");
    if (const json* v = obj.take("beta")) s.beta = read_double(*v, w + ".beta");
    if (const json* v = obj.take("alpha_bar")) s.alpha_bar = read_double(*v, w + ".alpha_bar");
    if (const json* v = obj.take("eta")) s.eta = read_double(*v, w + ".eta");
    if (const json* v = obj.take("participation"))
        s.participation = read_size(*v, w + ".participation");
    if (const json* v = obj.take("ihgp_subset")) s.ihgp_subset = read_size(*v, w + ".ihgp_subset");
    obj.finish();
}

const char* family_key(ProblemFamily f) {
    switch (f) {
        case ProblemFamily::minimax_quadratic: return "minimax_quadratic";
        case ProblemFamily::bilevel_quadratic: return "bilevel_quadratic";
        case ProblemFamily::compositional: return "compositional";
        case ProblemFamily::single_level: return "single_level";
    }
    fail("unreachable problem family");
}

json noise_to_json(const NoiseLevels& n) {
    return json{{"sigma_f", n.sigma_f}, {"sigma_g1", n.sigma_g1}, {"sigma_g2", n.sigma_g2}};
}

json spec_to_json(const RunConfig& cfg) {
    switch (cfg.family) {
        case ProblemFamily::minimax_quadratic: {
            const MinimaxQuadraticSpec& s = cfg.minimax;
            return json{{"m", s.m},
                        {"d", s.d},
                        {"lambda", s.lambda},
                        {"s", s.s},
                        {"t_max", s.t_max},
                        {"r_op", s.r_op},
                        {"init_scale", s.init_scale},
                        {"seed", s.seed},
                        {"as_bilevel", s.as_bilevel},
                        {"noise", noise_to_json(s.noise)}};
        }
        case ProblemFamily::bilevel_quadratic: {
            const BilevelQuadraticSpec& s = cfg.bilevel;
            return json{{"m", s.m},
                        {"d1", s.d1},
                        {"d2", s.d2},
                        {"eig_min", s.eig_min},
                        {"eig_max", s.eig_max},
                        {"cross_scale", s.cross_scale},
                        {"cross_hetero", s.cross_hetero},
                        {"c_spread", s.c_spread},
                        {"a_spread", s.a_spread},
                        {"u_spread", s.u_spread},
                        {"rho", s.rho},
                        {"r_op", s.r_op},
                        {"init_scale", s.init_scale},
                        {"seed", s.seed},
                        {"noise", noise_to_json(s.noise)}};
        }
        case ProblemFamily::compositional: {
            const CompositionalSpec& s = cfg.compositional;
            return json{{"m", s.m},
                        {"d1", s.d1},
                        {"d2", s.d2},
                        {"map_scale", s.map_scale},
                        {"v_spread", s.v_spread},
                        {"w_spread", s.w_spread},
                        {"r_op", s.r_op},
                        {"init_scale", s.init_scale},
                        {"seed", s.seed},
                        {"noise", noise_to_json(s.noise)}};
        }
        case ProblemFamily::single_level: {
            const SingleLevelSpec& s = cfg.single_level;
            return json{{"m", s.m},
                        {"d", s.d},
                        {"u_spread", s.u_spread},
                        {"r_op", s.r_op},
                        {"init_scale", s.init_scale},
                        {"seed", s.seed},
                        {"noise", noise_to_json(s.noise)}};
        }
    }
    fail("unreachable problem family");
}

}  // namespace

std::string to_string(ProblemFamily f) { return family_key(f); }

RunConfig config_from_preset(const std::string& problem_name) {
    RunConfig cfg;
    cfg.problem = problem_name;
    if (problem_name == "minimax-quadratic") {
        cfg.family = ProblemFamily::minimax_quadratic;
    } else if (problem_name == "bilevel-quadratic") {
        cfg.family = ProblemFamily::bilevel_quadratic;
    } else if (problem_name == "compositional") {
        cfg.family = ProblemFamily::compositional;
    } else if (problem_name == "single-level") {
        cfg.family = ProblemFamily::single_level;
    } else if (problem_name == "heterogeneous-bilevel") {
        cfg.family = ProblemFamily::bilevel_quadratic;
        cfg.bilevel = heterogeneous_bilevel_preset();
    } else if (problem_name == "paper-h") {
        // The reported experiment shape: the saddle instance run through the
        // full nested machinery, 100 clients with 10 sampled per epoch, a
        // 5-term inverse-Hessian budget, one inner round of 5 local steps,
        // and single-step outer rounds.
        cfg.family = ProblemFamily::minimax_quadratic;
        cfg.minimax.m = 100;
        cfg.minimax.lambda = 10.0;
        cfg.minimax.as_bilevel = true;
        cfg.schedule.N = 5;
        cfg.schedule.T = 1;
        cfg.schedule.tau_inner = 5;
        cfg.schedule.tau_outer = 1;
        cfg.schedule.participation = 10;
    } else {
        fail("unknown problem preset \"" + problem_name +
             "\" (expected one of: minimax-quadratic, bilevel-quadratic, compositional, "
             "single-level, heterogeneous-bilevel, paper-h)");
    }
    return cfg;
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(origin + ": " + e.what());
    }
    StrictObject top(doc, origin);

    // The preset decides the family and the defaults, so resolve it first.
    std::string problem = "minimax-quadratic";
    if (const json* v = top.take("problem")) problem = read_string(*v, "\"problem\"");
    RunConfig cfg = config_from_preset(problem);

    if (const json* v = top.take("algorithm")) {
        const std::string name = read_string(*v, "\"algorithm\"");
        cfg.algorithm = variant_from_string(name);
    }
    if (const json* v = top.take("seed")) cfg.seed = read_u64(*v, "\"seed\"");
    if (const json* v = top.take("metric_stride"))
        cfg.metric_stride = read_size(*v, "\"metric_stride\"");
    if (const json* v = top.take("out_csv")) cfg.out_csv = read_string(*v, "\"out_csv\"");
    if (const json* v = top.take("out_json")) cfg.out_json = read_string(*v, "\"out_json\"");
    if (const json* v = top.take("schedule")) apply_schedule(*v, cfg.schedule);

    // Only the nested block matching the active family is meaningful; any
    // other spec block is an unknown key and falls through to finish().
    if (const json* v = top.take(family_key(cfg.family))) {
        switch (cfg.family) {
            case ProblemFamily::minimax_quadratic: apply_minimax(*v, cfg.minimax); break;
            case ProblemFamily::bilevel_quadratic: apply_bilevel(*v, cfg.bilevel); break;
            case ProblemFamily::compositional: apply_compositional(*v, cfg.compositional); break;
            case ProblemFamily::single_level: apply_single_level(*v, cfg.single_level); break;
        }
    }
    top.finish();

    if (cfg.metric_stride == 0) fail("\"metric_stride\" must be >= 1");

    // Instantiate once to validate the spec and the schedule against it.
    ProblemPtr prob = make_problem(cfg);
    validate_schedule(cfg.schedule, *prob);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot read \"" + path + "\"");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

std::string config_to_text(const RunConfig& cfg) {
    json doc;
    doc["algorithm"] = to_string(cfg.algorithm);
    doc["problem"] = cfg.problem;
    doc["seed"] = cfg.seed;
    doc["metric_stride"] = cfg.metric_stride;
    doc["out_csv"] = cfg.out_csv;
    doc["out_json"] = cfg.out_json;
    const ScheduleConfig& s = cfg.schedule;
    doc["schedule"] = json{{"K", s.K},
                           {"T", s.T},
                           {"N", s.N},
                           {"tau_inner", s.tau_inner},
                           {"tau_outer", s.tau_outer},
                           {"mode", s.mode == ScheduleMode::manual ? "manual" : "theory"},
                           {"alpha", s.alpha},
                           {"beta", s.beta},
                           {"alpha_bar", s.alpha_bar},
                           {"eta", s.eta},
                           {"participation", s.participation},
                           {"ihgp_subset", s.ihgp_subset}};
    doc[family_key(cfg.family)] = spec_to_json(cfg);
    return doc.dump(2) + "\n";
}

ProblemPtr make_problem(const RunConfig& cfg) {
    switch (cfg.family) {
        case ProblemFamily::minimax_quadratic: return make_minimax_quadratic(cfg.minimax);
        case ProblemFamily::bilevel_quadratic: return make_bilevel_quadratic(cfg.bilevel);
        case ProblemFamily::compositional: return make_compositional(cfg.compositional);
        case ProblemFamily::single_level: return make_single_level(cfg.single_level);
    }
    fail("unreachable problem family");
}

}  // namespace fednest
