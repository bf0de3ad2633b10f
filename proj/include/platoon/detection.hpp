#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace platoon {

struct ComparatorConfig {
    double threshold = 2.0;  ///< m
};

/// Flags when |(gap_front - gap_rear) - nominal_diff| > threshold.
[[nodiscard]] bool comparator_check(double gap_front, double gap_rear, double nominal_diff,
                                    const ComparatorConfig& cfg) noexcept;

struct NormalizationState {
    double data_min = 0.0;
    double data_max = 1.0;
    double target_lo = 0.0;
    double target_hi = 1.0;
};

/// Throws DegenerateRangeError unless the series holds two distinct values.
NormalizationState minmax_fit(std::span<const double> series, double target_lo = 0.0, double target_hi = 1.0);

/// Like minmax_fit but widens [min, max] symmetrically to at least `min_span`,
/// so a flat series (constant speed) still normalizes.
NormalizationState minmax_fit_with_span(std::span<const double> series, double min_span, double target_lo = 0.0,
                                        double target_hi = 1.0);

[[nodiscard]] double minmax_transform(const NormalizationState& s, double value) noexcept;
[[nodiscard]] double minmax_inverse(const NormalizationState& s, double value) noexcept;
std::vector<double> minmax_transform(const NormalizationState& s, std::span<const double> values);
std::vector<double> minmax_inverse(const NormalizationState& s, std::span<const double> values);

/// inputs.row(i) = series[i .. i+lag), targets(i) = series[i + lag + step_forward - 1].
struct WindowedSeries {
    Eigen::MatrixXd inputs;
    Eigen::VectorXd targets;
};

/// Throws ContractError when the series is shorter than lag + step_forward.
WindowedSeries sliding_window(std::span<const double> series, int lag, int step_forward);

struct ElmConfig {
    int hidden = 50;
    double ridge = 1e-6;
    int lag = 2;
    int step_forward = 1;
    double target_lo = 0.0;
    double target_hi = 1.0;
};

/// Single-hidden-layer regressor with fixed random input weights and a
/// sigmoid activation; only output_weights are trained.
struct ElmModel {
    int hidden_count = 0;
    std::uint64_t random_state = 0;
    int lag = 2;
    int step_forward = 1;
    double ridge = 1e-6;
    Eigen::MatrixXd input_weights;  ///< hidden_count x lag
    Eigen::VectorXd hidden_biases;
    Eigen::VectorXd output_weights;
    bool frozen = false;
};

/// Draws input weights and biases uniform in [-1, 1] from an mt19937_64 seeded
/// with {random_state, stream...}. Output weights start at zero.
ElmModel make_elm(const ElmConfig& cfg, std::uint64_t random_state, std::span<const std::uint64_t> stream = {});

/// sigmoid(inputs * input_weights^T + hidden_biases^T), one row per sample.
Eigen::MatrixXd elm_hidden(const ElmModel& model, const Eigen::MatrixXd& inputs);

/// Ridge least squares for the output weights. Throws ContractError on a
/// frozen model or mismatched shapes, NumericalError when the solve fails.
ElmModel elm_fit(const ElmModel& model, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets);

/// Normalized one-step prediction from the last `lag` normalized values.
double elm_predict(const ElmModel& model, std::span<const double> window);

enum class AnomalyKind { PosAnom, VelAnom };
std::string_view to_string(AnomalyKind kind) noexcept;

struct AnomalyEvent {
    AnomalyKind kind = AnomalyKind::PosAnom;
    int control_step = 0;
    int vehicle = 1;
    double actual = 0.0;
    double predicted = 0.0;
};

/// Event iff |actual - predicted| > threshold (strict).
std::optional<AnomalyEvent> detect_anomaly(double actual, double predicted, double threshold, AnomalyKind kind,
                                           int control_step, int vehicle);

struct DetectionConfig {
    ComparatorConfig comparator;
    double nominal_diff = 0.0;  ///< benign front-minus-rear gap difference (m)
    ElmConfig elm;
    double position_threshold = 2.5;  ///< m
    double velocity_threshold = 2.0;  ///< m/s
    int training_window = 200;        ///< benign observations kept for refitting
    int warmup_margin = 10;           ///< detection suppressed for lag + warmup_margin steps
    double min_position_span = 1.0;
    double min_velocity_span = 1.0;

    [[nodiscard]] int warmup_steps() const noexcept { return elm.lag + warmup_margin; }
    /// Throws ConfigError.
    void validate() const;
};

struct Observation {
    int control_step = 0;
    double value = 0.0;
};

/// One ELM instance with its training buffer and the normalization it was fit with.
struct SeriesDetector {
    ElmModel model;
    NormalizationState norm;
    bool fitted = false;
    std::deque<Observation> training;  ///< benign observations, oldest first
    std::deque<Observation> recent;    ///< last `lag` observations of any kind
};

/// Position and velocity detectors of one follower.
struct VehicleDetector {
    int vehicle = 1;
    SeriesDetector position;
    SeriesDetector velocity;
    bool frozen = false;
    int observed = 0;  ///< observations seen, flagged or not
};

struct DetectorState {
    std::vector<VehicleDetector> vehicles;  ///< fv1 .. fvn
};

/// Position and velocity models of fv_i draw from streams {i, 0} and {i, 1}.
DetectorState make_detector(int n, std::uint64_t seed, const DetectionConfig& cfg);

/// Freeze-on-attack. Flagged: freeze, skip the fit, keep the observation out
/// of training. Otherwise: unfreeze, add the observation, refit. The
/// observation always enters the prediction window.
VehicleDetector update_or_freeze(VehicleDetector det, bool attack_flag, int control_step, double x, double v,
                                 const DetectionConfig& cfg);

/// Next-step prediction in original units, if the detector has a fit and a
/// full window ending at control_step - 1.
std::optional<double> predict_next(const SeriesDetector& s, int control_step, int lag);

/// What the detector sees in one control step. x and v are each follower's
/// kinematics as reported over V2V; gap_front is the on-board range to the
/// predecessor. All three hold n entries (index i = fv_{i+1}).
struct StepObservables {
    int control_step = 0;
    std::vector<double> x;
    std::vector<double> v;
    std::vector<double> gap_front;
};

struct VehicleFlags {
    bool comparator = false;
    bool pos_anom = false;
    bool vel_anom = false;
    std::optional<double> pos_pred;
    std::optional<double> vel_pred;

    [[nodiscard]] bool attack() const noexcept { return comparator || pos_anom || vel_anom; }
};

struct StepDetection {
    std::vector<VehicleFlags> flags;  ///< fv1 .. fvn
    std::vector<AnomalyEvent> events;
};

/// Comparator for fv1 .. fv_{n-1}, ELM position/velocity checks for every
/// follower, then update_or_freeze with the combined flag. All flags are
/// suppressed during warmup. Steps must arrive in control-step order.
StepDetection detect_step(const StepObservables& obs, DetectorState& state, const DetectionConfig& cfg);

}  // namespace platoon
