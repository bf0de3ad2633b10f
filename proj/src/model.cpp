#include "platoon/model.hpp"

#include <cmath>
#include <string>

#include "platoon/errors.hpp"

namespace platoon {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid sim config: " + what);
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

void SimConfig::validate() const {
    require(n >= 1, "n must be >= 1");
    require(finite(tau) && tau > 0.0, "tau must be > 0");
    require(finite(vehicle_length) && vehicle_length > 0.0, "vehicle_length must be > 0");
    require(finite(spacing_constant) && spacing_constant >= 0.0, "spacing_constant must be >= 0");
    require(finite(slack) && slack >= 0.0, "slack must be >= 0");
    require(finite(a_min) && finite(a_max) && a_min < a_max, "a_min < a_max required");
    require(a_min <= 0.0 && a_max >= 0.0, "acceleration box must contain 0");
    require(finite(v_min) && finite(v_max) && v_min < v_max, "v_min < v_max required");
    require(finite(q_alpha) && q_alpha > 0.0, "q_alpha must be > 0");
    require(finite(q_beta) && q_beta > 0.0, "q_beta must be > 0");
    require(max_iterations >= 1, "max_iterations must be >= 1");
    require(finite(primal_tol) && primal_tol > 0.0, "primal_tol must be > 0");
    require(total_control_steps >= 0, "total_control_steps must be >= 0");
    require(finite(dual_step) && dual_step > 0.0, "dual_step must be > 0");
    require(finite(dual_decay) && dual_decay >= 0.0 && dual_decay <= 1.0, "dual_decay must be in [0, 1]");
    require(max_halvings >= 0, "max_halvings must be >= 0");
}

PlatoonState initial_platoon(const SimConfig& config, double leader_speed) {
    config.validate();
    if (!std::isfinite(leader_speed) || leader_speed < config.v_min || leader_speed > config.v_max) {
        throw ConfigError("leader speed " + std::to_string(leader_speed) + " outside [v_min, v_max]");
    }
    const double gap = config.nominal_gap(leader_speed);
    PlatoonState state;
    state.followers.resize(static_cast<std::size_t>(config.n));
    for (int i = config.n; i >= 1; --i) {
        state.followers[static_cast<std::size_t>(i - 1)] =
            VehicleState{gap * static_cast<double>(config.n - i), leader_speed, 0.0};
    }
    state.leader = VehicleState{gap * static_cast<double>(config.n), leader_speed, 0.0};
    return state;
}

}  // namespace platoon
