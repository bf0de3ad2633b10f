#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "platoon/detection.hpp"
#include "platoon/metrics.hpp"
#include "platoon/mpc.hpp"
#include "platoon/scenario.hpp"

namespace platoon {

/// One trace line. For followers x and v are the kinematics reported over
/// V2V in that control step; gap_front and headway come from the plant after
/// the step. The leader (vehicle_id 0) carries its physical x and v and NaN
/// in every follower-only field.
struct TraceRow {
    int control_step = 0;
    int vehicle_id = 0;
    double x = 0.0;
    double v = 0.0;
    double u = 0.0;  ///< acceleration applied during the step
    double gap_front = 0.0;
    double headway = 0.0;
    bool comparator_flag = false;
    double elm_pos_pred = 0.0;
    double elm_vel_pred = 0.0;
    bool pos_anom = false;
    bool vel_anom = false;
};

struct StepSummary {
    int control_step = 0;
    int iterations_used = 0;
    bool converged = false;
    int dual_updates = 0;
    /// check_constraints of this step's u_next against the state it is applied to.
    std::vector<ConstraintViolation> violations;
    std::vector<double> u_next;
};

struct RunResult {
    std::vector<TraceRow> trace;
    std::vector<AnomalyEvent> anomalies;
    ImpactReport report;
    std::vector<StepSummary> steps;
    PlatoonState final_state;
};

/// Per control step: bias generation, message exchange with injection,
/// controller, plant step, detection, metrics. Deterministic in the scenario.
/// Numerical failures are rethrown naming the control step.
RunResult simulate(const Scenario& scenario);

/// Writes the enabled artifacts plus scenario.json into `dir`.
void write_artifacts(const Scenario& scenario, const RunResult& result, const std::filesystem::path& dir);

extern const char* const kTraceHeader;
extern const char* const kAnomalyHeader;
extern const char* const kImpactHeader;

std::string trace_csv(const std::vector<TraceRow>& rows);
std::string anomaly_csv(const std::vector<AnomalyEvent>& events);
std::string impact_csv(const ImpactReport& report);
std::string report_json(const Scenario& scenario, const RunResult& result);

/// Four bias matrices of control step k, header "iteration,fv1,...,fvn".
struct BiasCsv {
    std::string x_ite;
    std::string v_ite;
    std::string zx_ite;
    std::string zv_ite;
};
BiasCsv bias_csv(const BiasMatrices& bias);

/// generate-bias: parses the case file, writes x_ite.csv, v_ite.csv, zx_ite.csv, zv_ite.csv.
void generate_bias_cmd(const std::filesystem::path& case_file, int k, int n, int max_iterations,
                       const std::filesystem::path& out_dir);

/// Re-runs detection over a recorded trace. Only follower rows are used.
std::vector<AnomalyEvent> replay_detect(const std::filesystem::path& trace_file, const DetectionConfig& cfg,
                                        std::uint64_t seed);

/// replay-detect: writes anomalies.csv into out_dir. The config document may be
/// a scenario.json written by a run; "seed" and "detection" are read from it.
void replay_detect_cmd(const std::filesystem::path& trace_file, const std::filesystem::path& config_file,
                       const std::filesystem::path& out_dir);

}  // namespace platoon
