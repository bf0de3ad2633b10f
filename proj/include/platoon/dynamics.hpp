#pragma once

#include <span>

#include "platoon/model.hpp"

namespace platoon {

/// One exact step of the discrete longitudinal model:
/// v' = v + u*tau, x' = x + v*tau + u*tau^2/2. The applied u is stored.
[[nodiscard]] constexpr VehicleState step_vehicle(const VehicleState& state, double u, double tau) noexcept {
    return VehicleState{state.x + state.v * tau + u * tau * tau / 2.0, state.v + u * tau, u};
}

/// Steps every vehicle and increments the control step.
/// Throws ContractError when follower_u does not have one entry per follower.
PlatoonState step_platoon(const PlatoonState& platoon, double leader_u, std::span<const double> follower_u, double tau);

}  // namespace platoon
