#include <Eigen/QR>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "platoon/detection.hpp"
#include "platoon/errors.hpp"

using namespace platoon;

namespace {

// Ridge solution from the augmented system [H; sqrt(l) I] w = [y; 0] by QR,
// which never forms H^T H.
Eigen::VectorXd ridge_qr(const Eigen::MatrixXd& h, const Eigen::VectorXd& y, double ridge) {
    const auto rows = h.rows(), cols = h.cols();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows + cols, cols);
    a.topRows(rows) = h;
    a.bottomRows(cols) = std::sqrt(ridge) * Eigen::MatrixXd::Identity(cols, cols);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(rows + cols);
    b.head(rows) = y;
    return a.colPivHouseholderQr().solve(b);
}

VehicleDetector warmed(const DetectionConfig& cfg, int steps, double speed = 30.0) {
    VehicleDetector d = make_detector(1, 5, cfg).vehicles[0];
    for (int k = 0; k < steps; ++k) {
        // Gentle speed wobble so the velocity fit is not trivial.
        const double v = speed + 0.05 * std::sin(0.3 * k);
        d = update_or_freeze(std::move(d), false, k, speed * 0.1 * k, v, cfg);
    }
    return d;
}

}  // namespace

TEST_CASE("comparator") {
    const ComparatorConfig cfg;
    CHECK_FALSE(comparator_check(20.0, 20.0, 0.0, cfg));
    CHECK(comparator_check(20.0, 14.0, 0.0, cfg));
    CHECK_FALSE(comparator_check(25.0, 25.0, 0.0, cfg));
    CHECK_FALSE(comparator_check(22.0, 20.0, 0.0, cfg));  // exactly at the threshold
    CHECK(comparator_check(22.0001, 20.0, 0.0, cfg));
    CHECK_FALSE(comparator_check(23.0, 20.0, 3.0, cfg));

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> g(5.0, 40.0), shift(-4.0, 10.0);
    for (int i = 0; i < 1000; ++i) {
        const double a = g(rng), b = g(rng), s = shift(rng);
        CHECK(comparator_check(a, b, 0.0, cfg) == comparator_check(a + s, b + s, 0.0, cfg));
    }
}

TEST_CASE("min-max normalization") {
    const std::vector<double> s{0.0, 10.0};
    const auto st = minmax_fit(s);
    CHECK(minmax_transform(st, 5.0) == 0.5);
    CHECK(minmax_transform(st, 0.0) == 0.0);
    CHECK(minmax_transform(st, 10.0) == 1.0);

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> d(-500.0, 500.0);
    std::vector<double> series(50);
    for (auto& x : series) x = d(rng);
    const auto fit = minmax_fit(series, -1.0, 2.0);
    std::vector<double> xs(1000);
    for (auto& x : xs) x = d(rng);
    const auto back = minmax_inverse(fit, minmax_transform(fit, xs));
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(std::abs(back[i] - xs[i]) <= 1e-12 * std::max(1.0, std::abs(xs[i])));

    const std::vector<double> flat{30.0, 30.0, 30.0};
    CHECK_THROWS_AS(minmax_fit(flat), DegenerateRangeError);
    CHECK_THROWS_AS(minmax_fit(std::vector<double>{}), DegenerateRangeError);
    const auto widened = minmax_fit_with_span(flat, 1.0);
    CHECK(widened.data_min == 29.5);
    CHECK(widened.data_max == 30.5);
    CHECK(minmax_transform(widened, 30.0) == 0.5);
    CHECK_THROWS_AS(minmax_fit(s, 1.0, 1.0), ContractError);
}

TEST_CASE("sliding window") {
    const std::vector<double> s{1, 2, 3, 4};
    const auto w = sliding_window(s, 2, 1);
    REQUIRE(w.inputs.rows() == 2);
    CHECK(w.inputs(0, 0) == 1);
    CHECK(w.inputs(0, 1) == 2);
    CHECK(w.inputs(1, 0) == 2);
    CHECK(w.inputs(1, 1) == 3);
    CHECK(w.targets(0) == 3);
    CHECK(w.targets(1) == 4);

    for (int len = 2; len < 30; ++len) {
        std::vector<double> series(static_cast<std::size_t>(len));
        for (int i = 0; i < len; ++i) series[static_cast<std::size_t>(i)] = i * 1.5;
        for (int lag = 1; lag <= 4; ++lag) {
            for (int ahead = 1; ahead <= 3; ++ahead) {
                std::vector<std::pair<std::vector<double>, double>> expected;
                for (int i = 0; i + lag + ahead - 1 < len; ++i) {
                    std::vector<double> in(series.begin() + i, series.begin() + i + lag);
                    expected.emplace_back(in, series[static_cast<std::size_t>(i + lag + ahead - 1)]);
                }
                if (expected.empty()) {
                    CHECK_THROWS_AS(sliding_window(series, lag, ahead), ContractError);
                    continue;
                }
                const auto got = sliding_window(series, lag, ahead);
                REQUIRE(got.inputs.rows() == static_cast<Eigen::Index>(expected.size()));
                CHECK(got.inputs.rows() == len - lag - ahead + 1);
                for (std::size_t r = 0; r < expected.size(); ++r) {
                    for (int c = 0; c < lag; ++c) CHECK(got.inputs(static_cast<Eigen::Index>(r), c) == expected[r].first[static_cast<std::size_t>(c)]);
                    CHECK(got.targets(static_cast<Eigen::Index>(r)) == expected[r].second);
                }
            }
        }
    }
}

TEST_CASE("elm construction is seeded") {
    const ElmConfig cfg;
    const std::uint64_t s0[] = {1, 0};
    const std::uint64_t s1[] = {1, 1};
    const auto a = make_elm(cfg, 42, s0);
    const auto b = make_elm(cfg, 42, s0);
    CHECK(a.input_weights == b.input_weights);
    CHECK(a.hidden_biases == b.hidden_biases);
    CHECK(a.input_weights.rows() == 50);
    CHECK(a.input_weights.cols() == 2);
    CHECK(a.input_weights.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(a.output_weights.isZero(0.0));
    CHECK(make_elm(cfg, 43, s0).input_weights != a.input_weights);
    CHECK(make_elm(cfg, 42, s1).input_weights != a.input_weights);
}

TEST_CASE("elm fit") {
    const ElmConfig cfg;
    const auto model = make_elm(cfg, 7);

    SUBCASE("zero targets give zero weights") {
        std::vector<double> series(60);
        for (std::size_t i = 0; i < series.size(); ++i) series[i] = 0.5 + 0.3 * std::sin(0.2 * static_cast<double>(i));
        const auto w = sliding_window(series, 2, 1);
        const auto fit = elm_fit(model, w.inputs, Eigen::VectorXd::Zero(w.targets.size()));
        CHECK(fit.output_weights.norm() < 1e-6);
    }

    SUBCASE("noiseless ramp") {
        std::vector<double> ramp(100);
        for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 0.01 * static_cast<double>(i);
        const auto w = sliding_window(ramp, 2, 1);
        const auto fit = elm_fit(model, w.inputs, w.targets);
        double sse = 0.0;
        for (Eigen::Index r = 0; r < w.inputs.rows(); ++r) {
            const double p = elm_predict(fit, std::vector<double>{w.inputs(r, 0), w.inputs(r, 1)});
            sse += (p - w.targets(r)) * (p - w.targets(r));
        }
        CHECK(std::sqrt(sse / static_cast<double>(w.inputs.rows())) < 1e-3);

        // Same objective solved by QR on the augmented system.
        const Eigen::MatrixXd h = elm_hidden(model, w.inputs);
        const Eigen::VectorXd ref = ridge_qr(h, w.targets, cfg.ridge);
        CHECK((h * fit.output_weights - h * ref).cwiseAbs().maxCoeff() < 1e-6);
        CHECK(fit.input_weights == model.input_weights);
        CHECK(fit.hidden_biases == model.hidden_biases);

        const auto again = elm_fit(model, w.inputs, w.targets);
        CHECK(again.output_weights == fit.output_weights);
    }

    SUBCASE("contract errors") {
        ElmModel frozen = model;
        frozen.frozen = true;
        const Eigen::MatrixXd in = Eigen::MatrixXd::Ones(3, 2);
        CHECK_THROWS_AS(elm_fit(frozen, in, Eigen::VectorXd::Ones(3)), ContractError);
        CHECK_THROWS_AS(elm_fit(model, in, Eigen::VectorXd::Ones(2)), ContractError);
        CHECK_THROWS_AS(elm_fit(model, Eigen::MatrixXd::Ones(3, 3), Eigen::VectorXd::Ones(3)), ContractError);
        CHECK_THROWS_AS(elm_predict(model, std::vector<double>{1.0}), ContractError);
    }
}

TEST_CASE("elm predict") {
    SUBCASE("hand-built two-neuron model") {
        ElmModel m;
        m.hidden_count = 2;
        m.lag = 2;
        m.input_weights.resize(2, 2);
        m.input_weights << 0.5, -1.0, 2.0, 0.25;
        m.hidden_biases.resize(2);
        m.hidden_biases << 0.1, -0.3;
        m.output_weights.resize(2);
        m.output_weights << 1.5, -0.75;
        const double x0 = 0.4, x1 = 0.7;
        const double a0 = 0.5 * x0 - 1.0 * x1 + 0.1;
        const double a1 = 2.0 * x0 + 0.25 * x1 - 0.3;
        const double expected = 1.5 / (1.0 + std::exp(-a0)) - 0.75 / (1.0 + std::exp(-a1));
        CHECK(elm_predict(m, std::vector<double>{x0, x1}) == doctest::Approx(expected).epsilon(1e-15));
    }

    SUBCASE("near-constant series") {
        std::vector<double> raw(80);
        for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = 30.0 + 1e-4 * static_cast<double>(i % 3);
        const auto norm = minmax_fit_with_span(raw, 1.0);
        const auto w = sliding_window(minmax_transform(norm, raw), 2, 1);
        const auto fit = elm_fit(make_elm(ElmConfig{}, 3), w.inputs, w.targets);
        const double p = elm_predict(fit, std::vector<double>{minmax_transform(norm, 30.0), minmax_transform(norm, 30.0)});
        CHECK(std::abs(minmax_inverse(norm, p) - 30.0) < 1e-2);
    }
}

TEST_CASE("detect_anomaly") {
    const auto e = detect_anomaly(436.026, 432.419, 2.5, AnomalyKind::PosAnom, 41, 5);
    REQUIRE(e.has_value());
    CHECK(e->kind == AnomalyKind::PosAnom);
    CHECK(e->vehicle == 5);
    CHECK(e->control_step == 41);
    CHECK(e->actual == 436.026);
    CHECK(e->predicted == 432.419);
    CHECK_FALSE(detect_anomaly(10.0, 10.0, 2.0, AnomalyKind::VelAnom, 1, 1).has_value());
    CHECK(to_string(AnomalyKind::PosAnom) == "PosAnom");
    CHECK(to_string(AnomalyKind::VelAnom) == "VelAnom");

    for (int i = -40; i <= 40; ++i) {
        const double delta = 2.0 + i * 0.0125;
        const bool expected = std::abs(delta) > 2.0;
        CHECK(detect_anomaly(100.0 + delta, 100.0, 2.0, AnomalyKind::VelAnom, 0, 1).has_value() == expected);
        CHECK(detect_anomaly(100.0 - delta, 100.0, 2.0, AnomalyKind::VelAnom, 0, 1).has_value() == expected);
    }
}

TEST_CASE("freeze-on-attack") {
    const DetectionConfig cfg;
    VehicleDetector d = warmed(cfg, 20);
    REQUIRE(d.position.fitted);

    SUBCASE("weights change only on unflagged steps") {
        const bool flags[] = {false, true, true, false};
        Eigen::VectorXd prev = d.position.model.output_weights;
        for (int i = 0; i < 4; ++i) {
            const int k = 20 + i;
            d = update_or_freeze(std::move(d), flags[i], k, 3.0 * k + (flags[i] ? 9.0 : 0.0), 30.0 + 0.01 * i, cfg);
            const bool changed = d.position.model.output_weights != prev;
            CHECK(changed == !flags[i]);
            CHECK(d.frozen == flags[i]);
            CHECK(d.position.model.frozen == flags[i]);
            prev = d.position.model.output_weights;
        }
    }

    SUBCASE("frozen predictions ignore tainted observations except through the window") {
        VehicleDetector a = update_or_freeze(d, true, 20, 60.0 + 50.0, 30.0, cfg);
        VehicleDetector b = update_or_freeze(d, true, 20, 60.0 - 50.0, 30.0, cfg);
        CHECK(a.position.model.output_weights == d.position.model.output_weights);
        CHECK(a.position.norm.data_min == d.position.norm.data_min);
        CHECK(a.position.norm.data_max == d.position.norm.data_max);
        CHECK(a.position.training.size() == d.position.training.size());
        CHECK(b.position.model.output_weights == a.position.model.output_weights);
    }

    SUBCASE("tainted observations never reach training") {
        VehicleDetector with = d, without = d;
        for (int k = 20; k < 26; ++k) {
            const bool tainted = k >= 21 && k <= 23;
            const double x = 3.0 * k + (tainted ? 40.0 : 0.0);
            with = update_or_freeze(std::move(with), tainted, k, x, 30.0 + 0.01 * k, cfg);
            if (!tainted) without = update_or_freeze(std::move(without), false, k, x, 30.0 + 0.01 * k, cfg);
        }
        CHECK(with.position.model.output_weights == without.position.model.output_weights);
        CHECK(with.velocity.model.output_weights == without.velocity.model.output_weights);
    }

    SUBCASE("never-flagged runs keep learning") {
        Eigen::VectorXd prev = d.velocity.model.output_weights;
        for (int k = 20; k < 30; ++k) {
            d = update_or_freeze(std::move(d), false, k, 3.0 * k, 30.0 + 0.05 * std::sin(0.3 * k), cfg);
            CHECK(d.velocity.model.output_weights != prev);
            prev = d.velocity.model.output_weights;
        }
    }
}

TEST_CASE("predict_next needs a contiguous window") {
    const DetectionConfig cfg;
    VehicleDetector d = warmed(cfg, 20);
    CHECK(predict_next(d.position, 20, 2).has_value());
    CHECK_FALSE(predict_next(d.position, 22, 2).has_value());
    const auto fresh = make_detector(1, 5, cfg).vehicles[0];
    CHECK_FALSE(predict_next(fresh.position, 0, 2).has_value());
    // A benign straight-line trajectory is predicted well.
    CHECK(std::abs(*predict_next(d.position, 20, 2) - 60.0) < 0.5);
}

TEST_CASE("detect_step") {
    DetectionConfig cfg;
    const int n = 3;
    DetectorState st = make_detector(n, 11, cfg);
    auto obs_at = [&](int k, double bump) {
        StepObservables o;
        o.control_step = k;
        for (int i = 0; i < n; ++i) {
            o.x.push_back(3.0 * k - 20.0 * i + (i == 1 ? bump : 0.0));
            o.v.push_back(30.0);
            o.gap_front.push_back(20.0 + (i == 1 ? -bump : 0.0) + (i == 2 ? bump : 0.0));
        }
        return o;
    };

    // Warmup suppresses every flag, even for a gross deviation.
    DetectorState cold = make_detector(n, 11, cfg);
    for (int k = 0; k < cfg.warmup_steps(); ++k) {
        const auto r = detect_step(obs_at(k, k == cfg.warmup_steps() - 1 ? 30.0 : 0.0), cold, cfg);
        for (const auto& f : r.flags) CHECK_FALSE(f.attack());
        CHECK(r.events.empty());
    }

    for (int k = 0; k < cfg.warmup_steps(); ++k) detect_step(obs_at(k, 0.0), st, cfg);
    for (int k = cfg.warmup_steps(); k < 30; ++k) {
        const auto r = detect_step(obs_at(k, 0.0), st, cfg);
        for (const auto& f : r.flags) CHECK_FALSE(f.attack());
    }
    const auto hit = detect_step(obs_at(30, 10.0), st, cfg);
    CHECK(hit.flags[1].pos_anom);
    CHECK(hit.flags[0].comparator);  // fv1's rear gap shrank
    CHECK(hit.flags[1].comparator);
    CHECK_FALSE(hit.flags[2].comparator);  // the last follower has no rear gap
    CHECK(st.vehicles[1].frozen);
    bool has_event = false;
    for (const auto& e : hit.events) has_event = has_event || (e.vehicle == 2 && e.kind == AnomalyKind::PosAnom);
    CHECK(has_event);

    StepObservables bad = obs_at(31, 0.0);
    bad.v.pop_back();
    CHECK_THROWS_AS(detect_step(bad, st, cfg), ContractError);
}

TEST_CASE("detection config validation") {
    DetectionConfig c;
    CHECK_NOTHROW(c.validate());
    c.comparator.threshold = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.elm.hidden = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.training_window = 2;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    CHECK(c.warmup_steps() == 12);
}
