#include "platoon/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "platoon/errors.hpp"

namespace platoon {

using nlohmann::json;

double Scenario::leader_accel(int k) const noexcept {
    double a = 0.0;
    for (const auto& seg : leader_profile) {
        if (seg.start_step <= k) a = seg.acceleration;
    }
    return a;
}

void Scenario::validate() const {
    sim.validate();
    detection.validate();
    metrics.validate();
    attack.validate_for(sim.n);
    if (!std::isfinite(initial_speed) || initial_speed < sim.v_min || initial_speed > sim.v_max) {
        throw ConfigError("initial_speed outside [v_min, v_max]");
    }
    for (std::size_t i = 0; i < leader_profile.size(); ++i) {
        const auto& seg = leader_profile[i];
        if (seg.start_step < 0) throw ConfigError("leader_profile[" + std::to_string(i) + "]: start_step must be >= 0");
        if (!std::isfinite(seg.acceleration)) {
            throw ConfigError("leader_profile[" + std::to_string(i) + "]: acceleration must be finite");
        }
        if (i > 0 && seg.start_step <= leader_profile[i - 1].start_step) {
            throw ConfigError("leader_profile[" + std::to_string(i) + "]: start steps must increase");
        }
    }
    // The leader runs open loop, so its profile is checked by rolling it out.
    double v = initial_speed;
    for (int k = 0; k <= sim.total_control_steps; ++k) {
        v += leader_accel(k) * sim.tau;
        if (v < sim.v_min || v > sim.v_max) {
            throw ConfigError("leader_profile drives the leader to v = " + std::to_string(v) + " at control step " +
                              std::to_string(k + 1));
        }
    }
    for (std::size_t i = 0; i < drops.size(); ++i) {
        const auto& d = drops[i];
        const std::string where = "drops[" + std::to_string(i) + "]";
        if (d.sender < 1 || d.sender > sim.n) throw ConfigError(where + ": sender must be a follower in [1, n]");
        if (d.direction == Direction::Backward && d.sender < 2) {
            throw ConfigError(where + ": fv1 sends no backward messages");
        }
        if (d.step_start > d.step_end || d.iteration_start > d.iteration_end) {
            throw ConfigError(where + ": ranges need start <= end");
        }
    }
}

namespace {

// Reads members of one object, remembering which keys were used.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ParseError(path_ + ": expected an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        used_.insert(key);
        auto it = node_.find(key);
        if (it == node_.end()) return;
        try {
            if constexpr (std::is_same_v<T, int>) {
                if (!it->is_number_integer()) throw ParseError("");
            } else if constexpr (std::is_same_v<T, double>) {
                if (!it->is_number()) throw ParseError("");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) throw ParseError("");
            } else if constexpr (std::is_same_v<T, std::uint64_t>) {
                if (!it->is_number_unsigned()) throw ParseError("");
            }
            out = it->template get<T>();
        } catch (const std::exception&) {
            throw ParseError(path_ + "." + key + ": wrong type");
        }
    }

    const json* child(const char* key) {
        used_.insert(key);
        auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            if (!used_.count(it.key())) throw ParseError(path_ + "." + it.key() + ": unknown key");
        }
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> used_;
};

SimConfig parse_sim(const json& node, double& initial_speed) {
    SimConfig c;
    Section s(node, "sim");
    s.get("n", c.n);
    s.get("tau", c.tau);
    s.get("vehicle_length", c.vehicle_length);
    s.get("spacing_constant", c.spacing_constant);
    s.get("slack", c.slack);
    s.get("a_min", c.a_min);
    s.get("a_max", c.a_max);
    s.get("v_min", c.v_min);
    s.get("v_max", c.v_max);
    s.get("q_alpha", c.q_alpha);
    s.get("q_beta", c.q_beta);
    s.get("max_iterations", c.max_iterations);
    s.get("primal_tol", c.primal_tol);
    s.get("total_control_steps", c.total_control_steps);
    s.get("dual_step", c.dual_step);
    s.get("dual_decay", c.dual_decay);
    s.get("max_halvings", c.max_halvings);
    s.get("initial_speed", initial_speed);
    s.finish();
    return c;
}

void parse_detection_into(const json& node, DetectionConfig& c) {
    Section s(node, "detection");
    s.get("comparator_threshold", c.comparator.threshold);
    s.get("nominal_diff", c.nominal_diff);
    s.get("hidden", c.elm.hidden);
    s.get("ridge", c.elm.ridge);
    s.get("lag", c.elm.lag);
    s.get("step_forward", c.elm.step_forward);
    s.get("target_lo", c.elm.target_lo);
    s.get("target_hi", c.elm.target_hi);
    s.get("position_threshold", c.position_threshold);
    s.get("velocity_threshold", c.velocity_threshold);
    s.get("training_window", c.training_window);
    s.get("warmup_margin", c.warmup_margin);
    s.get("min_position_span", c.min_position_span);
    s.get("min_velocity_span", c.min_velocity_span);
    s.finish();
}

MetricsConfig parse_metrics(const json& node) {
    MetricsConfig c;
    Section s(node, "metrics");
    s.get("safe_lo", c.safe_lo);
    s.get("safe_hi", c.safe_hi);
    s.get("warmup", c.warmup);
    s.get("accel_lo", c.accel_lo);
    s.get("accel_hi", c.accel_hi);
    s.finish();
    return c;
}

OutputFlags parse_output(const json& node) {
    OutputFlags o;
    Section s(node, "output");
    s.get("trace", o.trace);
    s.get("anomalies", o.anomalies);
    s.get("report", o.report);
    s.get("impact_csv", o.impact_csv);
    s.finish();
    return o;
}

std::vector<LeaderSegment> parse_profile(const json& node) {
    if (!node.is_array()) throw ParseError("leader_profile: expected a list of [start_step, acceleration]");
    std::vector<LeaderSegment> out;
    for (std::size_t i = 0; i < node.size(); ++i) {
        const json& e = node[i];
        const std::string where = "leader_profile[" + std::to_string(i) + "]";
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number()) {
            throw ParseError(where + ": expected [start_step, acceleration]");
        }
        out.push_back({e[0].get<int>(), e[1].get<double>()});
    }
    return out;
}

std::pair<int, int> parse_range(const json& node, const std::string& where) {
    if (!node.is_array() || node.size() != 2 || !node[0].is_number_integer() || !node[1].is_number_integer()) {
        throw ParseError(where + ": expected [start, end]");
    }
    return {node[0].get<int>(), node[1].get<int>()};
}

std::vector<DropRule> parse_drops(const json& node) {
    if (!node.is_array()) throw ParseError("drops: expected a list");
    std::vector<DropRule> out;
    for (std::size_t i = 0; i < node.size(); ++i) {
        const std::string where = "drops[" + std::to_string(i) + "]";
        Section s(node[i], where);
        DropRule r;
        s.get("sender", r.sender);
        std::string dir = "forward";
        s.get("direction", dir);
        if (dir == "forward") {
            r.direction = Direction::Forward;
        } else if (dir == "backward") {
            r.direction = Direction::Backward;
        } else {
            throw ParseError(where + ".direction: expected \"forward\" or \"backward\"");
        }
        if (const json* steps = s.child("steps")) std::tie(r.step_start, r.step_end) = parse_range(*steps, where + ".steps");
        if (const json* its = s.child("iterations")) {
            std::tie(r.iteration_start, r.iteration_end) = parse_range(*its, where + ".iterations");
        }
        s.finish();
        out.push_back(r);
    }
    return out;
}

}  // namespace

Scenario parse_scenario(const json& doc) {
    Scenario sc;
    Section top(doc, "scenario");
    top.get("seed", sc.seed);
    if (const json* n = top.child("sim")) sc.sim = parse_sim(*n, sc.initial_speed);
    if (const json* n = top.child("leader_profile")) sc.leader_profile = parse_profile(*n);
    if (const json* n = top.child("attack")) sc.attack = parse_attack_case(*n);
    if (const json* n = top.child("drops")) sc.drops = parse_drops(*n);
    if (const json* n = top.child("detection")) parse_detection_into(*n, sc.detection);
    if (const json* n = top.child("metrics")) sc.metrics = parse_metrics(*n);
    if (const json* n = top.child("output")) sc.output = parse_output(*n);
    top.finish();
    sc.validate();
    return sc;
}

Scenario parse_scenario(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scenario: ") + e.what());
    }
    return parse_scenario(doc);
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    return parse_scenario(std::string_view(text));
}

json to_json(const Scenario& s) {
    json j;
    j["seed"] = s.seed;
    const SimConfig& c = s.sim;
    j["sim"] = {{"n", c.n},
                {"tau", c.tau},
                {"vehicle_length", c.vehicle_length},
                {"spacing_constant", c.spacing_constant},
                {"slack", c.slack},
                {"a_min", c.a_min},
                {"a_max", c.a_max},
                {"v_min", c.v_min},
                {"v_max", c.v_max},
                {"q_alpha", c.q_alpha},
                {"q_beta", c.q_beta},
                {"max_iterations", c.max_iterations},
                {"primal_tol", c.primal_tol},
                {"total_control_steps", c.total_control_steps},
                {"dual_step", c.dual_step},
                {"dual_decay", c.dual_decay},
                {"max_halvings", c.max_halvings},
                {"initial_speed", s.initial_speed}};
    auto profile = json::array();
    for (const auto& seg : s.leader_profile) profile.push_back({seg.start_step, seg.acceleration});
    j["leader_profile"] = profile;
    j["attack"] = to_json(s.attack);
    auto drops = json::array();
    for (const auto& d : s.drops) {
        drops.push_back({{"sender", d.sender},
                         {"direction", d.direction == Direction::Forward ? "forward" : "backward"},
                         {"steps", {d.step_start, d.step_end}},
                         {"iterations", {d.iteration_start, d.iteration_end}}});
    }
    j["drops"] = drops;
    const DetectionConfig& d = s.detection;
    j["detection"] = {{"comparator_threshold", d.comparator.threshold},
                      {"nominal_diff", d.nominal_diff},
                      {"hidden", d.elm.hidden},
                      {"ridge", d.elm.ridge},
                      {"lag", d.elm.lag},
                      {"step_forward", d.elm.step_forward},
                      {"target_lo", d.elm.target_lo},
                      {"target_hi", d.elm.target_hi},
                      {"position_threshold", d.position_threshold},
                      {"velocity_threshold", d.velocity_threshold},
                      {"training_window", d.training_window},
                      {"warmup_margin", d.warmup_margin},
                      {"min_position_span", d.min_position_span},
                      {"min_velocity_span", d.min_velocity_span}};
    const MetricsConfig& m = s.metrics;
    j["metrics"] = {{"safe_lo", m.safe_lo},
                    {"safe_hi", m.safe_hi},
                    {"warmup", m.warmup},
                    {"accel_lo", m.accel_lo},
                    {"accel_hi", m.accel_hi}};
    j["output"] = {{"trace", s.output.trace},
                   {"anomalies", s.output.anomalies},
                   {"report", s.output.report},
                   {"impact_csv", s.output.impact_csv}};
    return j;
}

DetectionConfig parse_detection_config(const json& doc) {
    if (!doc.is_object()) throw ParseError("detection config: expected an object");
    DetectionConfig c;
    if (auto it = doc.find("detection"); it != doc.end()) parse_detection_into(*it, c);
    c.validate();
    return c;
}

}  // namespace platoon
