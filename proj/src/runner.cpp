#include "platoon/runner.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "platoon/csv.hpp"
#include "platoon/dynamics.hpp"
#include "platoon/errors.hpp"

namespace platoon {

const char* const kTraceHeader =
    "control_step,vehicle_id,x,v,u,gap_front,headway,comparator_flag,elm_pos_pred,elm_vel_pred,pos_anom,vel_anom";
const char* const kAnomalyHeader = "anomaly_type,control_step,vehicle_no,actual_value,predicted_value";
const char* const kImpactHeader = "control_step,vehicle,headway,acceleration,safe_lo,safe_hi";

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

RunResult simulate(const Scenario& scenario) {
    scenario.validate();
    const SimConfig& cfg = scenario.sim;
    const auto n = static_cast<std::size_t>(cfg.n);

    PlatoonState state = initial_platoon(cfg, scenario.initial_speed);
    state.leader.u = scenario.leader_accel(0);
    V2VChannel channel(scenario.drops);
    DetectorState detector = make_detector(cfg.n, scenario.seed, scenario.detection);

    std::vector<std::vector<std::optional<double>>> headway(n);
    std::vector<std::vector<double>> accel(n);
    RunResult result;
    result.trace.reserve(static_cast<std::size_t>(cfg.total_control_steps) * (n + 1));

    for (int k = 0; k < cfg.total_control_steps; ++k) {
        state.control_step = k;
        const BiasMatrices bias = iter_attack_value_cal(cfg.n, k, cfg.max_iterations, scenario.attack);
        const double leader_next = scenario.leader_accel(k + 1);
        const ControlOutcome out = run_control_step(state, leader_next, bias, channel, cfg);

        std::vector<double> held(n);
        for (std::size_t i = 0; i < n; ++i) held[i] = state.followers[i].u;
        const double leader_held = state.leader.u;
        PlatoonState next = step_platoon(state, leader_held, held, cfg.tau);
        next.leader.u = leader_next;
        for (std::size_t i = 0; i < n; ++i) next.followers[i].u = out.u_next[i];

        StepSummary summary;
        summary.control_step = k;
        summary.iterations_used = out.iterations_used;
        summary.converged = out.converged;
        summary.dual_updates = out.dual_updates;
        summary.u_next = out.u_next;
        summary.violations = check_constraints(out.u_next, next, cfg);
        result.steps.push_back(std::move(summary));

        StepObservables obs;
        obs.control_step = k;
        for (std::size_t i = 0; i < n; ++i) {
            obs.x.push_back(out.reported[i].x);
            obs.v.push_back(out.reported[i].v);
            obs.gap_front.push_back(next.gap_front(i + 1));
        }
        StepDetection det;
        try {
            det = detect_step(obs, detector, scenario.detection);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " [detection, control step " + std::to_string(k) + "]");
        }
        result.anomalies.insert(result.anomalies.end(), det.events.begin(), det.events.end());

        TraceRow leader;
        leader.control_step = k;
        leader.vehicle_id = 0;
        leader.x = next.leader.x;
        leader.v = next.leader.v;
        leader.u = leader_held;
        leader.gap_front = leader.headway = leader.elm_pos_pred = leader.elm_vel_pred = kNaN;
        result.trace.push_back(leader);
        for (std::size_t i = 0; i < n; ++i) {
            const auto h = time_headway(obs.gap_front[i], next.followers[i].v, cfg.vehicle_length);
            const VehicleFlags& f = det.flags[i];
            TraceRow r;
            r.control_step = k;
            r.vehicle_id = static_cast<int>(i) + 1;
            r.x = obs.x[i];
            r.v = obs.v[i];
            r.u = held[i];
            r.gap_front = obs.gap_front[i];
            r.headway = h.value_or(kNaN);
            r.comparator_flag = f.comparator;
            r.elm_pos_pred = f.pos_pred.value_or(kNaN);
            r.elm_vel_pred = f.vel_pred.value_or(kNaN);
            r.pos_anom = f.pos_anom;
            r.vel_anom = f.vel_anom;
            result.trace.push_back(r);
            headway[i].push_back(h);
            accel[i].push_back(held[i]);
        }
        state = std::move(next);
    }
    result.report = build_impact_report(headway, accel, scenario.metrics);
    result.final_state = state;
    return result;
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
    std::string out = std::string(kTraceHeader) + "\n";
    for (const auto& r : rows) {
        out += std::to_string(r.control_step) + "," + std::to_string(r.vehicle_id) + "," + csv::format_exact(r.x) + "," +
               csv::format_exact(r.v) + "," + csv::format_exact(r.u) + "," + csv::format_exact(r.gap_front) + "," +
               csv::format_exact(r.headway) + "," + (r.comparator_flag ? "1" : "0") + "," +
               csv::format_exact(r.elm_pos_pred) + "," + csv::format_exact(r.elm_vel_pred) + "," +
               (r.pos_anom ? "1" : "0") + "," + (r.vel_anom ? "1" : "0") + "\n";
    }
    return out;
}

std::string anomaly_csv(const std::vector<AnomalyEvent>& events) {
    std::string out = std::string(kAnomalyHeader) + "\n";
    for (const auto& e : events) {
        out += std::string(to_string(e.kind)) + "," + std::to_string(e.control_step) + "," + std::to_string(e.vehicle) +
               "," + csv::format_fixed(e.actual) + "," + csv::format_fixed(e.predicted) + "\n";
    }
    return out;
}

std::string impact_csv(const ImpactReport& report) {
    std::string out = std::string(kImpactHeader) + "\n";
    const std::string lo = csv::format_exact(report.config.safe_lo);
    const std::string hi = csv::format_exact(report.config.safe_hi);
    std::size_t steps = 0;
    for (const auto& v : report.vehicles) steps = std::max(steps, v.headway.size());
    for (std::size_t k = 0; k < steps; ++k) {
        for (const auto& v : report.vehicles) {
            const double h = k < v.headway.size() && v.headway[k] ? *v.headway[k] : kNaN;
            const double a = k < v.acceleration.size() ? v.acceleration[k] : kNaN;
            out += std::to_string(k) + "," + std::to_string(v.vehicle) + "," + csv::format_exact(h) + "," +
                   csv::format_exact(a) + "," + lo + "," + hi + "\n";
        }
    }
    return out;
}

std::string report_json(const Scenario& scenario, const RunResult& result) {
    nlohmann::json j;
    j["seed"] = scenario.seed;
    j["control_steps"] = scenario.sim.total_control_steps;
    j["impact"] = to_json(result.report);

    auto nonconverged = nlohmann::json::array();
    auto gap_steps = nlohmann::json::array();
    long total_iterations = 0;
    int max_iterations = 0;
    for (const auto& s : result.steps) {
        total_iterations += s.iterations_used;
        max_iterations = std::max(max_iterations, s.iterations_used);
        if (!s.converged) nonconverged.push_back(s.control_step);
        for (const auto& v : s.violations) {
            if (v.kind == ConstraintViolation::Kind::SafetyGap) {
                gap_steps.push_back({{"control_step", s.control_step}, {"vehicle", v.vehicle}});
            }
        }
    }
    j["controller"] = {{"total_iterations", total_iterations},
                       {"max_iterations_used", max_iterations},
                       {"nonconverged_steps", nonconverged},
                       {"safety_gap_violations", gap_steps}};

    std::map<int, int> per_vehicle;
    for (const auto& e : result.anomalies) ++per_vehicle[e.vehicle];
    auto counts = nlohmann::json::object();
    for (const auto& [vehicle, count] : per_vehicle) counts["fv" + std::to_string(vehicle)] = count;
    j["detection"] = {{"anomaly_count", result.anomalies.size()},
                      {"first_anomaly_step", result.anomalies.empty()
                                                 ? nlohmann::json(nullptr)
                                                 : nlohmann::json(result.anomalies.front().control_step)},
                      {"anomalies_per_vehicle", counts}};
    return j.dump(2) + "\n";
}

void write_artifacts(const Scenario& scenario, const RunResult& result, const std::filesystem::path& dir) {
    if (scenario.output.trace) csv::write_file(dir / "trace.csv", trace_csv(result.trace));
    if (scenario.output.anomalies) csv::write_file(dir / "anomalies.csv", anomaly_csv(result.anomalies));
    if (scenario.output.impact_csv) csv::write_file(dir / "impact.csv", impact_csv(result.report));
    if (scenario.output.report) csv::write_file(dir / "impact_report.json", report_json(scenario, result));
    csv::write_file(dir / "scenario.json", to_json(scenario).dump(2) + "\n");
}

namespace {

std::string matrix_csv(const Eigen::MatrixXd& m) {
    std::string out = "iteration";
    for (Eigen::Index j = 0; j < m.cols(); ++j) out += ",fv" + std::to_string(j + 1);
    out += "\n";
    for (Eigen::Index t = 0; t < m.rows(); ++t) {
        out += std::to_string(t);
        for (Eigen::Index j = 0; j < m.cols(); ++j) out += "," + csv::format_exact(m(t, j));
        out += "\n";
    }
    return out;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

BiasCsv bias_csv(const BiasMatrices& bias) {
    return BiasCsv{matrix_csv(bias.x_ite), matrix_csv(bias.v_ite), matrix_csv(bias.zx_ite), matrix_csv(bias.zv_ite)};
}

void generate_bias_cmd(const std::filesystem::path& case_file, int k, int n, int max_iterations,
                       const std::filesystem::path& out_dir) {
    if (n < 1) throw ConfigError("generate-bias: n must be >= 1");
    if (max_iterations < 1) throw ConfigError("generate-bias: max_iterations must be >= 1");
    const std::string text = read_text(case_file);
    const AttackCase attack = parse_attack_case(std::string_view(text));
    attack.validate_for(n);
    const BiasCsv files = bias_csv(iter_attack_value_cal(n, k, max_iterations, attack));
    csv::write_file(out_dir / "x_ite.csv", files.x_ite);
    csv::write_file(out_dir / "v_ite.csv", files.v_ite);
    csv::write_file(out_dir / "zx_ite.csv", files.zx_ite);
    csv::write_file(out_dir / "zv_ite.csv", files.zv_ite);
}

std::vector<AnomalyEvent> replay_detect(const std::filesystem::path& trace_file, const DetectionConfig& cfg,
                                        std::uint64_t seed) {
    cfg.validate();
    const csv::Table table = csv::read(trace_file);
    if (table.header.empty()) return {};
    const std::size_t c_step = table.column("control_step");
    const std::size_t c_id = table.column("vehicle_id");
    const std::size_t c_x = table.column("x");
    const std::size_t c_v = table.column("v");
    const std::size_t c_gap = table.column("gap_front");

    // control step -> vehicle -> (x, v, gap), in file order of steps.
    std::vector<int> order;
    std::map<int, std::map<int, std::array<double, 3>>> steps;
    int n = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = trace_file.string() + " row " + std::to_string(r + 1);
        const int id = csv::parse_int(row[c_id], where + " vehicle_id");
        if (id < 1) continue;
        const int k = csv::parse_int(row[c_step], where + " control_step");
        if (!steps.count(k)) order.push_back(k);
        steps[k][id] = {csv::parse_double(row[c_x], where + " x"), csv::parse_double(row[c_v], where + " v"),
                        csv::parse_double(row[c_gap], where + " gap_front")};
        n = std::max(n, id);
    }
    if (n == 0) return {};

    DetectorState detector = make_detector(n, seed, cfg);
    std::vector<AnomalyEvent> events;
    for (int k : order) {
        const auto& vehicles = steps[k];
        if (static_cast<int>(vehicles.size()) != n) {
            throw ParseError(trace_file.string() + ": control step " + std::to_string(k) + " lacks some followers");
        }
        StepObservables obs;
        obs.control_step = k;
        for (const auto& [id, vals] : vehicles) {
            obs.x.push_back(vals[0]);
            obs.v.push_back(vals[1]);
            obs.gap_front.push_back(vals[2]);
        }
        const StepDetection det = detect_step(obs, detector, cfg);
        events.insert(events.end(), det.events.begin(), det.events.end());
    }
    return events;
}

void replay_detect_cmd(const std::filesystem::path& trace_file, const std::filesystem::path& config_file,
                       const std::filesystem::path& out_dir) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text(config_file));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(config_file.string() + ": " + e.what());
    }
    const DetectionConfig cfg = parse_detection_config(doc);
    std::uint64_t seed = 0;
    if (auto it = doc.find("seed"); it != doc.end()) {
        if (!it->is_number_unsigned()) throw ParseError(config_file.string() + ": seed must be a non-negative integer");
        seed = it->get<std::uint64_t>();
    }
    csv::write_file(out_dir / "anomalies.csv", anomaly_csv(replay_detect(trace_file, cfg, seed)));
}

}  // namespace platoon
