#include "platoon/detection.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "platoon/errors.hpp"

namespace platoon {

bool comparator_check(double gap_front, double gap_rear, double nominal_diff, const ComparatorConfig& cfg) noexcept {
    return std::abs((gap_front - gap_rear) - nominal_diff) > cfg.threshold;
}

namespace {

void check_target(double lo, double hi) {
    if (!(lo < hi)) throw ContractError("normalization target range needs target_lo < target_hi");
}

}  // namespace

NormalizationState minmax_fit(std::span<const double> series, double target_lo, double target_hi) {
    check_target(target_lo, target_hi);
    if (series.empty()) throw DegenerateRangeError("minmax_fit: empty series");
    const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
    if (!(*hi > *lo)) throw DegenerateRangeError("minmax_fit: series has no two distinct values");
    return NormalizationState{*lo, *hi, target_lo, target_hi};
}

NormalizationState minmax_fit_with_span(std::span<const double> series, double min_span, double target_lo,
                                        double target_hi) {
    check_target(target_lo, target_hi);
    if (series.empty()) throw DegenerateRangeError("minmax_fit_with_span: empty series");
    const auto [lo_it, hi_it] = std::minmax_element(series.begin(), series.end());
    double lo = *lo_it;
    double hi = *hi_it;
    if (hi - lo < min_span) {
        const double mid = lo + (hi - lo) / 2.0;
        lo = mid - min_span / 2.0;
        hi = mid + min_span / 2.0;
    }
    if (!(hi > lo)) throw DegenerateRangeError("minmax_fit_with_span: zero span");
    return NormalizationState{lo, hi, target_lo, target_hi};
}

double minmax_transform(const NormalizationState& s, double value) noexcept {
    return s.target_lo + (value - s.data_min) * (s.target_hi - s.target_lo) / (s.data_max - s.data_min);
}

double minmax_inverse(const NormalizationState& s, double value) noexcept {
    return s.data_min + (value - s.target_lo) * (s.data_max - s.data_min) / (s.target_hi - s.target_lo);
}

std::vector<double> minmax_transform(const NormalizationState& s, std::span<const double> values) {
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(minmax_transform(s, v));
    return out;
}

std::vector<double> minmax_inverse(const NormalizationState& s, std::span<const double> values) {
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(minmax_inverse(s, v));
    return out;
}

WindowedSeries sliding_window(std::span<const double> series, int lag, int step_forward) {
    if (lag < 1 || step_forward < 1) throw ContractError("sliding_window: lag and step_forward must be >= 1");
    const auto len = static_cast<long>(series.size());
    const long count = len - lag - step_forward + 1;
    if (count < 1) throw ContractError("sliding_window: series shorter than lag + step_forward");
    WindowedSeries w;
    w.inputs.resize(count, lag);
    w.targets.resize(count);
    for (long i = 0; i < count; ++i) {
        for (int j = 0; j < lag; ++j) w.inputs(i, j) = series[static_cast<std::size_t>(i + j)];
        w.targets(i) = series[static_cast<std::size_t>(i + lag + step_forward - 1)];
    }
    return w;
}

ElmModel make_elm(const ElmConfig& cfg, std::uint64_t random_state, std::span<const std::uint64_t> stream) {
    if (cfg.hidden < 1 || cfg.lag < 1 || cfg.step_forward < 1) throw ContractError("make_elm: sizes must be >= 1");
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(random_state),
                                     static_cast<std::uint32_t>(random_state >> 32)};
    for (std::uint64_t s : stream) {
        words.push_back(static_cast<std::uint32_t>(s));
        words.push_back(static_cast<std::uint32_t>(s >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    std::mt19937_64 gen(seq);
    // Spelled out instead of uniform_real_distribution so weights match across standard libraries.
    auto uniform = [&gen] { return 2.0 * (static_cast<double>(gen() >> 11) * 0x1.0p-53) - 1.0; };

    ElmModel m;
    m.hidden_count = cfg.hidden;
    m.random_state = random_state;
    m.lag = cfg.lag;
    m.step_forward = cfg.step_forward;
    m.ridge = cfg.ridge;
    m.input_weights.resize(cfg.hidden, cfg.lag);
    for (int r = 0; r < cfg.hidden; ++r) {
        for (int c = 0; c < cfg.lag; ++c) m.input_weights(r, c) = uniform();
    }
    m.hidden_biases.resize(cfg.hidden);
    for (int r = 0; r < cfg.hidden; ++r) m.hidden_biases(r) = uniform();
    m.output_weights = Eigen::VectorXd::Zero(cfg.hidden);
    return m;
}

Eigen::MatrixXd elm_hidden(const ElmModel& model, const Eigen::MatrixXd& inputs) {
    if (inputs.cols() != model.lag) throw ContractError("elm_hidden: input width must equal lag");
    Eigen::MatrixXd pre = inputs * model.input_weights.transpose();
    pre.rowwise() += model.hidden_biases.transpose();
    return pre.unaryExpr([](double a) { return 1.0 / (1.0 + std::exp(-a)); });
}

ElmModel elm_fit(const ElmModel& model, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets) {
    if (model.frozen) throw ContractError("elm_fit: model is frozen");
    if (inputs.rows() != targets.size() || inputs.rows() == 0) {
        throw ContractError("elm_fit: need one target per input row and at least one row");
    }
    const Eigen::MatrixXd h = elm_hidden(model, inputs);
    Eigen::MatrixXd a = h.transpose() * h;
    a.diagonal().array() += model.ridge;
    const Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        std::ostringstream os;
        os << "elm_fit: normal equations not positive definite (rows=" << inputs.rows() << ", ridge=" << model.ridge
           << ")";
        throw NumericalError(os.str());
    }
    ElmModel out = model;
    out.output_weights = llt.solve(h.transpose() * targets);
    if (!out.output_weights.allFinite()) throw NumericalError("elm_fit: non-finite output weights");
    return out;
}

double elm_predict(const ElmModel& model, std::span<const double> window) {
    if (static_cast<int>(window.size()) != model.lag) throw ContractError("elm_predict: window length must equal lag");
    double y = 0.0;
    for (int r = 0; r < model.hidden_count; ++r) {
        double a = model.hidden_biases(r);
        for (int c = 0; c < model.lag; ++c) a += model.input_weights(r, c) * window[static_cast<std::size_t>(c)];
        y += model.output_weights(r) / (1.0 + std::exp(-a));
    }
    return y;
}

std::string_view to_string(AnomalyKind kind) noexcept {
    return kind == AnomalyKind::PosAnom ? "PosAnom" : "VelAnom";
}

std::optional<AnomalyEvent> detect_anomaly(double actual, double predicted, double threshold, AnomalyKind kind,
                                           int control_step, int vehicle) {
    if (!(std::abs(actual - predicted) > threshold)) return std::nullopt;
    return AnomalyEvent{kind, control_step, vehicle, actual, predicted};
}

void DetectionConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("detection: ") + what);
    };
    require(comparator.threshold > 0.0, "comparator threshold must be > 0");
    require(std::isfinite(nominal_diff), "nominal_diff must be finite");
    require(elm.hidden >= 1, "hidden must be >= 1");
    require(elm.ridge > 0.0, "ridge must be > 0");
    require(elm.lag >= 1 && elm.step_forward >= 1, "lag and step_forward must be >= 1");
    require(elm.target_lo < elm.target_hi, "target_lo must be < target_hi");
    require(position_threshold > 0.0 && velocity_threshold > 0.0, "anomaly thresholds must be > 0");
    require(training_window >= elm.lag + elm.step_forward, "training_window must hold at least one window");
    require(warmup_margin >= 0, "warmup_margin must be >= 0");
    require(min_position_span > 0.0 && min_velocity_span > 0.0, "minimum spans must be > 0");
}

DetectorState make_detector(int n, std::uint64_t seed, const DetectionConfig& cfg) {
    DetectorState st;
    st.vehicles.reserve(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        VehicleDetector d;
        d.vehicle = i;
        const std::uint64_t pos_stream[] = {static_cast<std::uint64_t>(i), 0};
        const std::uint64_t vel_stream[] = {static_cast<std::uint64_t>(i), 1};
        d.position.model = make_elm(cfg.elm, seed, pos_stream);
        d.velocity.model = make_elm(cfg.elm, seed, vel_stream);
        st.vehicles.push_back(std::move(d));
    }
    return st;
}

namespace {

// Refits on every window of consecutive control steps in the training buffer.
void refit(SeriesDetector& s, double min_span, const DetectionConfig& cfg) {
    const int lag = cfg.elm.lag;
    const int ahead = cfg.elm.step_forward;
    const int need = lag + ahead;
    if (static_cast<int>(s.training.size()) < need) return;

    std::vector<double> values;
    values.reserve(s.training.size());
    for (const auto& o : s.training) values.push_back(o.value);
    const NormalizationState norm = minmax_fit_with_span(values, min_span, cfg.elm.target_lo, cfg.elm.target_hi);

    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i + static_cast<std::size_t>(need) <= s.training.size(); ++i) {
        const std::size_t last = i + static_cast<std::size_t>(need) - 1;
        if (s.training[last].control_step - s.training[i].control_step == need - 1) starts.push_back(i);
    }
    if (starts.empty()) return;

    Eigen::MatrixXd inputs(static_cast<Eigen::Index>(starts.size()), lag);
    Eigen::VectorXd targets(static_cast<Eigen::Index>(starts.size()));
    for (std::size_t r = 0; r < starts.size(); ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        for (int c = 0; c < lag; ++c) inputs(row, c) = minmax_transform(norm, s.training[starts[r] + c].value);
        targets(row) = minmax_transform(norm, s.training[starts[r] + static_cast<std::size_t>(need) - 1].value);
    }
    s.model = elm_fit(s.model, inputs, targets);
    s.norm = norm;
    s.fitted = true;
}

void observe(SeriesDetector& s, bool attack_flag, int control_step, double value, double min_span,
             const DetectionConfig& cfg) {
    s.model.frozen = attack_flag;
    if (!attack_flag) {
        s.training.push_back({control_step, value});
        while (static_cast<int>(s.training.size()) > cfg.training_window) s.training.pop_front();
        refit(s, min_span, cfg);
    }
    s.recent.push_back({control_step, value});
    while (static_cast<int>(s.recent.size()) > cfg.elm.lag) s.recent.pop_front();
}

}  // namespace

VehicleDetector update_or_freeze(VehicleDetector det, bool attack_flag, int control_step, double x, double v,
                                 const DetectionConfig& cfg) {
    det.frozen = attack_flag;
    observe(det.position, attack_flag, control_step, x, cfg.min_position_span, cfg);
    observe(det.velocity, attack_flag, control_step, v, cfg.min_velocity_span, cfg);
    ++det.observed;
    return det;
}

std::optional<double> predict_next(const SeriesDetector& s, int control_step, int lag) {
    if (!s.fitted || static_cast<int>(s.recent.size()) < lag) return std::nullopt;
    if (s.recent.back().control_step != control_step - 1) return std::nullopt;
    if (s.recent.back().control_step - s.recent.front().control_step != lag - 1) return std::nullopt;
    std::vector<double> window;
    window.reserve(s.recent.size());
    for (const auto& o : s.recent) window.push_back(minmax_transform(s.norm, o.value));
    return minmax_inverse(s.norm, elm_predict(s.model, window));
}

StepDetection detect_step(const StepObservables& obs, DetectorState& state, const DetectionConfig& cfg) {
    const std::size_t n = state.vehicles.size();
    if (obs.x.size() != n || obs.v.size() != n || obs.gap_front.size() != n) {
        throw ContractError("detect_step: observables must hold one entry per follower");
    }
    StepDetection out;
    out.flags.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        VehicleDetector& det = state.vehicles[i];
        VehicleFlags& f = out.flags[i];
        const bool armed = det.observed >= cfg.warmup_steps();
        const int vehicle = static_cast<int>(i) + 1;

        f.pos_pred = predict_next(det.position, obs.control_step, cfg.elm.lag);
        f.vel_pred = predict_next(det.velocity, obs.control_step, cfg.elm.lag);
        if (armed) {
            if (i + 1 < n) {
                f.comparator = comparator_check(obs.gap_front[i], obs.gap_front[i + 1], cfg.nominal_diff, cfg.comparator);
            }
            if (f.pos_pred) {
                if (auto e = detect_anomaly(obs.x[i], *f.pos_pred, cfg.position_threshold, AnomalyKind::PosAnom,
                                            obs.control_step, vehicle)) {
                    f.pos_anom = true;
                    out.events.push_back(*e);
                }
            }
            if (f.vel_pred) {
                if (auto e = detect_anomaly(obs.v[i], *f.vel_pred, cfg.velocity_threshold, AnomalyKind::VelAnom,
                                            obs.control_step, vehicle)) {
                    f.vel_anom = true;
                    out.events.push_back(*e);
                }
            }
        }
        det = update_or_freeze(std::move(det), f.attack(), obs.control_step, obs.x[i], obs.v[i], cfg);
    }
    return out;
}

}  // namespace platoon
