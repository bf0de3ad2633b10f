#pragma once

#include <cstddef>
#include <vector>

namespace platoon {

/// Longitudinal state of one vehicle at a control step.
///
/// `u` is the acceleration commanded for the interval starting at this step
/// (after a plant step it holds the acceleration that was applied).
struct VehicleState {
    double x = 0.0;  ///< position (m)
    double v = 0.0;  ///< velocity (m/s)
    double u = 0.0;  ///< acceleration (m/s^2)

    bool operator==(const VehicleState&) const = default;
};

/// Shared simulation and controller parameters.
struct SimConfig {
    int n = 6;                          ///< follower count
    double tau = 0.1;                   ///< sample length (s)
    double vehicle_length = 5.0;        ///< L (m)
    double spacing_constant = 10.0 / 3.0;  ///< p; p*tau*30 = 10 m
    double slack = 5.0;                    ///< delta (m); nominal gap 20 m, headway 0.5 s at 30 m/s
    double a_min = -5.0;
    double a_max = 3.0;
    double v_min = 0.0;
    double v_max = 40.0;
    double q_alpha = 1.0;
    double q_beta = 1.0;
    int max_iterations = 300;
    double primal_tol = 0.01;
    int total_control_steps = 100;

    // Dual loop (projected ascent on the safety multipliers).
    double dual_step = 0.5;
    double dual_decay = 0.9;
    int max_halvings = 20;

    /// Throws ConfigError when any invariant is violated.
    void validate() const;

    /// Velocity-adaptive safety distance L + p*tau*v.
    [[nodiscard]] double safety_distance(double v) const noexcept {
        return vehicle_length + spacing_constant * tau * v;
    }

    /// Target front-to-front gap L + p*tau*v + delta (zero spacing error).
    [[nodiscard]] double nominal_gap(double v) const noexcept {
        return safety_distance(v) + slack;
    }

    bool operator==(const SimConfig&) const = default;
};

/// Leader plus n followers ordered front to rear (followers[0] is fv1).
struct PlatoonState {
    VehicleState leader;
    std::vector<VehicleState> followers;
    int control_step = 0;

    [[nodiscard]] std::size_t size() const noexcept { return followers.size(); }

    /// Vehicle by platoon index: 0 is the leader, i >= 1 is fv_i.
    [[nodiscard]] const VehicleState& vehicle(std::size_t index) const {
        return index == 0 ? leader : followers.at(index - 1);
    }

    /// Front-to-front gap x_{i-1} - x_i for follower index i in [1, n].
    [[nodiscard]] double gap_front(std::size_t index) const {
        return vehicle(index - 1).x - vehicle(index).x;
    }

    bool operator==(const PlatoonState&) const = default;
};

struct SpacingState {
    double z = 0.0;        ///< spacing error (m)
    double z_prime = 0.0;  ///< relative speed (m/s)
};

/// Platoon at equilibrium: every vehicle at `leader_speed`, zero acceleration,
/// gaps at the nominal spacing. The last follower sits at x = 0.
PlatoonState initial_platoon(const SimConfig& config, double leader_speed);

}  // namespace platoon
