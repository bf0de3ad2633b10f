#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <string>

#include "platoon/attack.hpp"
#include "platoon/errors.hpp"
#include "platoon/runner.hpp"
#include "platoon/scenario.hpp"

namespace py = pybind11;
using namespace platoon;

namespace {

Scenario scenario_from(const std::string& text) { return parse_scenario(std::string_view(text)); }

py::dict trace_columns(const std::vector<TraceRow>& rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::VectorXi step(n), id(n);
    Eigen::VectorXd x(n), v(n), u(n), gap(n), headway(n), pos_pred(n), vel_pred(n);
    Eigen::Matrix<bool, Eigen::Dynamic, 1> cmp(n), pos(n), vel(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const TraceRow& r = rows[static_cast<std::size_t>(i)];
        step(i) = r.control_step;
        id(i) = r.vehicle_id;
        x(i) = r.x;
        v(i) = r.v;
        u(i) = r.u;
        gap(i) = r.gap_front;
        headway(i) = r.headway;
        pos_pred(i) = r.elm_pos_pred;
        vel_pred(i) = r.elm_vel_pred;
        cmp(i) = r.comparator_flag;
        pos(i) = r.pos_anom;
        vel(i) = r.vel_anom;
    }
    py::dict d;
    d["control_step"] = step;
    d["vehicle_id"] = id;
    d["x"] = x;
    d["v"] = v;
    d["u"] = u;
    d["gap_front"] = gap;
    d["headway"] = headway;
    d["comparator_flag"] = cmp;
    d["elm_pos_pred"] = pos_pred;
    d["elm_vel_pred"] = vel_pred;
    d["pos_anom"] = pos;
    d["vel_anom"] = vel;
    return d;
}

py::list anomaly_list(const std::vector<AnomalyEvent>& events) {
    py::list out;
    for (const auto& e : events) {
        py::dict d;
        d["anomaly_type"] = std::string(to_string(e.kind));
        d["control_step"] = e.control_step;
        d["vehicle_no"] = e.vehicle;
        d["actual_value"] = e.actual;
        d["predicted_value"] = e.predicted;
        out.append(d);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Platoon simulation core";

    auto config_error = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", config_error.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);

    m.def("resolve_scenario", [](const std::string& text) { return to_json(scenario_from(text)).dump(); },
          py::arg("scenario_json"), "Fill defaults and validate; returns the resolved document as JSON text.");

    m.def(
        "simulate",
        [](const std::string& text) {
            const Scenario s = scenario_from(text);
            RunResult r;
            {
                py::gil_scoped_release release;
                r = simulate(s);
            }
            py::dict out;
            out["trace"] = trace_columns(r.trace);
            out["anomalies"] = anomaly_list(r.anomalies);
            out["report"] = report_json(s, r);
            out["trace_csv"] = trace_csv(r.trace);
            out["anomalies_csv"] = anomaly_csv(r.anomalies);
            return out;
        },
        py::arg("scenario_json"));

    m.def(
        "run_to_dir",
        [](const std::string& text, const std::filesystem::path& dir) {
            const Scenario s = scenario_from(text);
            py::gil_scoped_release release;
            write_artifacts(s, simulate(s), dir);
        },
        py::arg("scenario_json"), py::arg("out_dir"));

    m.def(
        "generate_bias",
        [](const std::string& case_json, int k, int n, int max_iterations) {
            const AttackCase attack = parse_attack_case(std::string_view(case_json));
            const BiasMatrices b = iter_attack_value_cal(n, k, max_iterations, attack);
            py::dict d;
            d["x_ite"] = b.x_ite;
            d["v_ite"] = b.v_ite;
            d["zx_ite"] = b.zx_ite;
            d["zv_ite"] = b.zv_ite;
            return d;
        },
        py::arg("case_json"), py::arg("k"), py::arg("n"), py::arg("max_iterations"));

    m.def(
        "replay_detect",
        [](const std::filesystem::path& trace, const std::string& config_json, std::uint64_t seed) {
            const auto doc = nlohmann::json::parse(config_json, nullptr, false);
            if (doc.is_discarded()) throw ParseError("config: invalid JSON");
            return anomaly_list(replay_detect(trace, parse_detection_config(doc), seed));
        },
        py::arg("trace_csv"), py::arg("config_json") = "{}", py::arg("seed") = 1,
        "Detection over a recorded trace. The config is a scenario document or {\"detection\": {...}}.");
}
