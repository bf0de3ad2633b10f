#pragma once

#include <span>
#include <string>
#include <vector>

#include "platoon/attack.hpp"
#include "platoon/model.hpp"
#include "platoon/v2v.hpp"

namespace platoon {

/// One follower's iterate inside a control step.
struct IterationState {
    double u_ite = 0.0;   ///< candidate acceleration for the next control step
    double v_ite = 0.0;   ///< predicted velocity under u_ite
    double x_ite = 0.0;   ///< predicted position under u_ite
    double zx_ite = 0.0;  ///< spacing error to the predecessor
    double zv_ite = 0.0;  ///< relative speed to the predecessor
    int iteration_index = 0;
};

/// Non-negative multipliers of the safety-gap constraints, one per follower
/// (the pair formed with its predecessor).
struct DualState {
    std::vector<double> multipliers;
    int dual_iteration = 0;
};

/// What the follower's own measurements and limits fix for the whole control step.
struct LocalProblem {
    VehicleState base;  ///< state the next command will act on
    double u_lo = 0.0;  ///< max(a_min, (v_min - v)/tau)
    double u_hi = 0.0;  ///< min(a_max, (v_max - v)/tau)
};

LocalProblem make_local_problem(const VehicleState& base, const SimConfig& config);

/// Channel values a follower has received in the current iteration.
struct NeighborView {
    double pred_x = 0.0;  ///< predecessor's x_ite
    double pred_v = 0.0;  ///< predecessor's v_ite
    bool has_follower = false;
    double follower_zx = 0.0;  ///< follower's zx_ite, computed against our current u_ite
    double follower_zv = 0.0;
};

struct Prediction {
    double x = 0.0;
    double v = 0.0;
};

/// Same closed form as the plant.
[[nodiscard]] Prediction predict(const VehicleState& state, double u, double tau) noexcept;

/// z = x_prev - x_self - (L + p*tau*v_self + delta).
[[nodiscard]] double spacing_error(double x_pred_prev, double x_pred_self, double v_pred_self, const SimConfig& config) noexcept;

/// z' = v_prev - v_self.
[[nodiscard]] constexpr double relative_speed(double v_pred_prev, double v_pred_self) noexcept {
    return v_pred_prev - v_pred_self;
}

/// Sum over followers of 1/2*Qa*z^2 + Qb*z'^2 + tau^2/2*u^2.
double cost(std::span<const double> z, std::span<const double> z_prime, std::span<const double> u, const SimConfig& config);

/// Local Lagrangian of one follower as a function of its candidate u:
/// its own pair cost, the follower pair cost (linear in u around `u_ref`),
/// the control penalty, and multiplier * (safety distance - predicted gap).
double local_lagrangian(const LocalProblem& problem, const NeighborView& nb, double u_ref, double u, double multiplier,
                        const SimConfig& config);

/// One damped Newton step on the local Lagrangian followed by clipping to
/// [u_lo, u_hi]. Backtracking halves the step until the Lagrangian does not
/// increase (at most config.max_halvings times). Throws NumericalError on
/// non-finite derivatives.
IterationState primal_step(const LocalProblem& problem, const IterationState& state, const NeighborView& nb,
                           double multiplier, const SimConfig& config);

/// Projected ascent: violated pairs (margin < 0) grow by dual_step * |margin|,
/// satisfied pairs decay by dual_decay. Margins are predicted gap minus safety distance.
DualState dual_update(const DualState& dual, std::span<const double> margins, const SimConfig& config);

/// Primal stop condition: the largest change of any u_ite is within primal_tol.
[[nodiscard]] constexpr bool primal_exit(double max_delta, const SimConfig& config) noexcept {
    return max_delta <= config.primal_tol;
}

/// Dual stop condition: every predicted gap at least the safety distance.
[[nodiscard]] bool dual_satisfied(std::span<const double> margins) noexcept;

struct ConstraintViolation {
    enum class Kind { Acceleration, Velocity, SafetyGap };
    Kind kind = Kind::Acceleration;
    int vehicle = 1;  ///< follower index, 1-based
    double value = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

std::string to_string(ConstraintViolation::Kind kind);

/// Checks acceleration, velocity and safety-gap limits of `u` applied to
/// `platoon` for one step (the leader applies platoon.leader.u). Empty iff all hold.
std::vector<ConstraintViolation> check_constraints(std::span<const double> u, const PlatoonState& platoon,
                                                   const SimConfig& config);

/// State the next command acts on: every vehicle advanced by the acceleration
/// already held for this control step; the leader then carries `leader_next_u`.
PlatoonState prediction_base(const PlatoonState& platoon, double leader_next_u, double tau);

struct ControlOutcome {
    std::vector<double> u_next;
    int iterations_used = 0;
    bool converged = false;
    int dual_updates = 0;

    /// max_i |u_ite(t+1) - u_ite(t)| for every iteration t.
    std::vector<double> max_delta;
    /// Iterations whose primal test passed but whose gaps were infeasible.
    std::vector<int> dual_update_iterations;
    /// Each follower's x_ite / v_ite as its successor received them in the last
    /// exchange (after bias); the last follower reports its own iterate.
    std::vector<Prediction> reported;
    std::vector<IterationState> final_iterates;
    DualState dual;
};

/// Runs the primal/dual double loop for one control step.
///
/// `platoon.followers[i].u` is the acceleration held during this step and
/// `platoon.leader.u` the leader's; the outcome is the command for the next
/// step. Every iteration exchanges messages through `channel`, which applies
/// `bias` for this control step.
ControlOutcome run_control_step(const PlatoonState& platoon, double leader_next_u, const BiasMatrices& bias,
                                V2VChannel& channel, const SimConfig& config);

}  // namespace platoon
