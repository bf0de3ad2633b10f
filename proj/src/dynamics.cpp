#include "platoon/dynamics.hpp"

#include <string>

#include "platoon/errors.hpp"

namespace platoon {

PlatoonState step_platoon(const PlatoonState& platoon, double leader_u, std::span<const double> follower_u, double tau) {
    if (follower_u.size() != platoon.followers.size()) {
        throw ContractError("step_platoon: expected " + std::to_string(platoon.followers.size()) +
                            " follower accelerations, got " + std::to_string(follower_u.size()));
    }
    PlatoonState next;
    next.leader = step_vehicle(platoon.leader, leader_u, tau);
    next.followers.reserve(platoon.followers.size());
    for (std::size_t i = 0; i < platoon.followers.size(); ++i) {
        next.followers.push_back(step_vehicle(platoon.followers[i], follower_u[i], tau));
    }
    next.control_step = platoon.control_step + 1;
    return next;
}

}  // namespace platoon
