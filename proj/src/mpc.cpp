#include "platoon/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "platoon/dynamics.hpp"
#include "platoon/errors.hpp"

namespace platoon {

LocalProblem make_local_problem(const VehicleState& base, const SimConfig& config) {
    LocalProblem p;
    p.base = base;
    // The velocity limit is a box on u once the base velocity is known.
    p.u_lo = std::max(config.a_min, (config.v_min - base.v) / config.tau);
    p.u_hi = std::min(config.a_max, (config.v_max - base.v) / config.tau);
    if (p.u_lo > p.u_hi) {
        // Base velocity already outside [v_min, v_max]; steer back as hard as allowed.
        const double u = base.v > config.v_max ? config.a_min : config.a_max;
        p.u_lo = p.u_hi = u;
    }
    return p;
}

Prediction predict(const VehicleState& state, double u, double tau) noexcept {
    return Prediction{state.x + state.v * tau + u * tau * tau / 2.0, state.v + u * tau};
}

double spacing_error(double x_pred_prev, double x_pred_self, double v_pred_self, const SimConfig& config) noexcept {
    return x_pred_prev - x_pred_self - config.nominal_gap(v_pred_self);
}

double cost(std::span<const double> z, std::span<const double> z_prime, std::span<const double> u, const SimConfig& config) {
    if (z.size() != z_prime.size() || z.size() != u.size()) {
        throw ContractError("cost: z, z_prime and u must have equal length");
    }
    const double tau2 = config.tau * config.tau;
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        total += 0.5 * config.q_alpha * z[i] * z[i] + config.q_beta * z_prime[i] * z_prime[i] + tau2 / 2.0 * u[i] * u[i];
    }
    return total;
}

namespace {

struct LocalTerms {
    double value = 0.0;
    double gradient = 0.0;
    double hessian = 0.0;
};

LocalTerms evaluate_local(const LocalProblem& problem, const NeighborView& nb, double u_ref, double u, double multiplier,
                          const SimConfig& cfg) {
    const double tau = cfg.tau;
    const double tau2 = tau * tau;
    const double qa = cfg.q_alpha;
    const double qb = cfg.q_beta;
    // d(safety distance - gap)/du = p*tau^2 + tau^2/2; the spacing error moves opposite.
    const double slope = cfg.spacing_constant * tau2 + tau2 / 2.0;

    const Prediction self = predict(problem.base, u, tau);
    const double z = spacing_error(nb.pred_x, self.x, self.v, cfg);
    const double zp = relative_speed(nb.pred_v, self.v);
    const double violation = cfg.safety_distance(self.v) - (nb.pred_x - self.x);

    LocalTerms t;
    t.value = 0.5 * qa * z * z + qb * zp * zp + tau2 / 2.0 * u * u + multiplier * violation;
    t.gradient = -slope * qa * z - 2.0 * qb * tau * zp + tau2 * u + multiplier * slope;
    t.hessian = qa * slope * slope + 2.0 * qb * tau2 + tau2;
    if (nb.has_follower) {
        const double zf = nb.follower_zx + tau2 / 2.0 * (u - u_ref);
        const double zpf = nb.follower_zv + tau * (u - u_ref);
        t.value += 0.5 * qa * zf * zf + qb * zpf * zpf;
        t.gradient += qa * (tau2 / 2.0) * zf + 2.0 * qb * tau * zpf;
        t.hessian += qa * tau2 * tau2 / 4.0 + 2.0 * qb * tau2;
    }
    return t;
}

}  // namespace

double local_lagrangian(const LocalProblem& problem, const NeighborView& nb, double u_ref, double u, double multiplier,
                        const SimConfig& config) {
    return evaluate_local(problem, nb, u_ref, u, multiplier, config).value;
}

IterationState primal_step(const LocalProblem& problem, const IterationState& state, const NeighborView& nb,
                           double multiplier, const SimConfig& config) {
    const double u0 = state.u_ite;
    const LocalTerms at = evaluate_local(problem, nb, u0, u0, multiplier, config);
    if (!std::isfinite(at.gradient) || !std::isfinite(at.hessian) || !std::isfinite(at.value) || at.hessian <= 0.0) {
        std::ostringstream os;
        os << "primal_step: non-finite Newton terms (gradient=" << at.gradient << ", hessian=" << at.hessian
           << ", u=" << u0 << ", pred_x=" << nb.pred_x << ", pred_v=" << nb.pred_v << ", multiplier=" << multiplier << ")";
        throw NumericalError(os.str());
    }

    const double direction = -at.gradient / at.hessian;
    const double slack = 1e-12 * (1.0 + std::abs(at.value));
    double step = 1.0;
    double accepted = u0;
    for (int halving = 0; halving <= config.max_halvings; ++halving) {
        const double candidate = std::clamp(u0 + step * direction, problem.u_lo, problem.u_hi);
        if (local_lagrangian(problem, nb, u0, candidate, multiplier, config) <= at.value + slack) {
            accepted = candidate;
            break;
        }
        step /= 2.0;
    }

    IterationState next;
    next.u_ite = accepted;
    const Prediction p = predict(problem.base, accepted, config.tau);
    next.x_ite = p.x;
    next.v_ite = p.v;
    next.zx_ite = spacing_error(nb.pred_x, p.x, p.v, config);
    next.zv_ite = relative_speed(nb.pred_v, p.v);
    next.iteration_index = state.iteration_index + 1;
    return next;
}

DualState dual_update(const DualState& dual, std::span<const double> margins, const SimConfig& config) {
    if (margins.size() != dual.multipliers.size()) throw ContractError("dual_update: one margin per multiplier required");
    DualState next = dual;
    for (std::size_t i = 0; i < margins.size(); ++i) {
        double& m = next.multipliers[i];
        if (margins[i] < 0.0) {
            m = std::max(0.0, m - config.dual_step * margins[i]);
        } else {
            m = std::max(0.0, m * config.dual_decay);
        }
    }
    ++next.dual_iteration;
    return next;
}

bool dual_satisfied(std::span<const double> margins) noexcept {
    return std::all_of(margins.begin(), margins.end(), [](double m) { return m >= 0.0; });
}

std::string to_string(ConstraintViolation::Kind kind) {
    switch (kind) {
        case ConstraintViolation::Kind::Acceleration: return "acceleration";
        case ConstraintViolation::Kind::Velocity: return "velocity";
        case ConstraintViolation::Kind::SafetyGap: return "safety_gap";
    }
    return "?";
}

std::vector<ConstraintViolation> check_constraints(std::span<const double> u, const PlatoonState& platoon,
                                                   const SimConfig& config) {
    if (u.size() != platoon.followers.size()) throw ContractError("check_constraints: one acceleration per follower required");
    std::vector<ConstraintViolation> out;
    const PlatoonState next = step_platoon(platoon, platoon.leader.u, u, config.tau);
    for (std::size_t i = 0; i < u.size(); ++i) {
        const int vehicle = static_cast<int>(i) + 1;
        if (!(u[i] >= config.a_min && u[i] <= config.a_max)) {
            out.push_back({ConstraintViolation::Kind::Acceleration, vehicle, u[i], config.a_min, config.a_max});
        }
        const double v = next.followers[i].v;
        if (!(v >= config.v_min && v <= config.v_max)) {
            out.push_back({ConstraintViolation::Kind::Velocity, vehicle, v, config.v_min, config.v_max});
        }
        const double gap = next.gap_front(i + 1);
        const double required = config.safety_distance(v);
        if (!(gap >= required)) {
            out.push_back({ConstraintViolation::Kind::SafetyGap, vehicle, gap, required, std::numeric_limits<double>::infinity()});
        }
    }
    return out;
}

PlatoonState prediction_base(const PlatoonState& platoon, double leader_next_u, double tau) {
    std::vector<double> held;
    held.reserve(platoon.followers.size());
    for (const auto& f : platoon.followers) held.push_back(f.u);
    PlatoonState base = step_platoon(platoon, platoon.leader.u, held, tau);
    base.leader.u = leader_next_u;
    return base;
}

ControlOutcome run_control_step(const PlatoonState& platoon, double leader_next_u, const BiasMatrices& bias,
                                V2VChannel& channel, const SimConfig& config) {
    const std::size_t n = platoon.followers.size();
    if (n == 0) throw ContractError("run_control_step: platoon has no followers");
    if (bias.cols() != static_cast<int>(n) || bias.rows() < config.max_iterations) {
        throw ContractError("run_control_step: bias matrices must be (max_iterations x n)");
    }

    const PlatoonState base = prediction_base(platoon, leader_next_u, config.tau);
    const Prediction leader_pred = predict(base.leader, leader_next_u, config.tau);

    std::vector<LocalProblem> problems;
    std::vector<IterationState> iter(n);
    problems.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        problems.push_back(make_local_problem(base.followers[i], config));
        IterationState& s = iter[i];
        s.u_ite = std::clamp(platoon.followers[i].u, problems[i].u_lo, problems[i].u_hi);
        const Prediction p = predict(base.followers[i], s.u_ite, config.tau);
        s.x_ite = p.x;
        s.v_ite = p.v;
    }

    ControlOutcome out;
    out.dual.multipliers.assign(n, 0.0);
    out.reported.resize(n);
    channel.begin_step(platoon.control_step, &bias);

    std::vector<ChannelValues> values(n + 1);
    values[0] = ChannelValues{leader_pred.x, leader_pred.v, 0.0, 0.0};
    std::vector<double> margins(n);

    for (int t = 0; t < config.max_iterations; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            values[i + 1].x_ite = iter[i].x_ite;
            values[i + 1].v_ite = iter[i].v_ite;
        }
        const auto forward = channel.deliver(exchange_forward(values, t));
        for (std::size_t i = 0; i < n; ++i) {
            iter[i].zx_ite = spacing_error(forward[i].x_ite, iter[i].x_ite, iter[i].v_ite, config);
            iter[i].zv_ite = relative_speed(forward[i].v_ite, iter[i].v_ite);
            values[i + 1].zx_ite = iter[i].zx_ite;
            values[i + 1].zv_ite = iter[i].zv_ite;
        }
        const auto backward = channel.deliver(exchange_backward(values, t));

        for (std::size_t i = 0; i + 1 < n; ++i) out.reported[i] = Prediction{forward[i + 1].x_ite, forward[i + 1].v_ite};
        out.reported[n - 1] = Prediction{iter[n - 1].x_ite, iter[n - 1].v_ite};

        double max_delta = 0.0;
        std::vector<IterationState> next(n);
        for (std::size_t i = 0; i < n; ++i) {
            NeighborView nb;
            nb.pred_x = forward[i].x_ite;
            nb.pred_v = forward[i].v_ite;
            if (i + 1 < n) {
                nb.has_follower = true;
                nb.follower_zx = backward[i].zx_ite;
                nb.follower_zv = backward[i].zv_ite;
            }
            try {
                next[i] = primal_step(problems[i], iter[i], nb, out.dual.multipliers[i], config);
            } catch (const NumericalError& e) {
                std::ostringstream os;
                os << e.what() << " [control step " << platoon.control_step << ", fv" << (i + 1) << ", iteration " << t
                   << "]";
                throw NumericalError(os.str());
            }
            max_delta = std::max(max_delta, std::abs(next[i].u_ite - iter[i].u_ite));
        }
        iter = std::move(next);
        out.iterations_used = t + 1;
        out.max_delta.push_back(max_delta);

        if (primal_exit(max_delta, config)) {
            for (std::size_t i = 0; i < n; ++i) {
                margins[i] = (forward[i].x_ite - iter[i].x_ite) - config.safety_distance(iter[i].v_ite);
            }
            if (dual_satisfied(margins)) {
                out.converged = true;
                break;
            }
            out.dual = dual_update(out.dual, margins, config);
            ++out.dual_updates;
            out.dual_update_iterations.push_back(t);
        }
    }

    out.u_next.reserve(n);
    for (const auto& s : iter) out.u_next.push_back(s.u_ite);
    out.final_iterates = std::move(iter);
    return out;
}

}  // namespace platoon
