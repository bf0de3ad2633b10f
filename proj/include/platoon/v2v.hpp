#pragma once

#include <map>
#include <span>
#include <utility>
#include <vector>

#include "platoon/attack.hpp"

namespace platoon {

enum class Direction {
    Forward,   ///< predecessor -> follower, carries x_ite / v_ite
    Backward,  ///< follower -> predecessor, carries zx_ite / zv_ite
};

/// One per-iteration V2V payload. Vehicle indices are platoon indices
/// (0 = leader, i = fv_i). Fields the direction does not carry stay 0.
struct IterationMessage {
    int sender = 0;
    int receiver = 0;
    int iteration_index = 0;
    Direction direction = Direction::Forward;
    double x_ite = 0.0;
    double v_ite = 0.0;
    double zx_ite = 0.0;
    double zv_ite = 0.0;

    bool operator==(const IterationMessage&) const = default;
};

/// Values a vehicle currently exposes to its neighbours.
struct ChannelValues {
    double x_ite = 0.0;
    double v_ite = 0.0;
    double zx_ite = 0.0;
    double zv_ite = 0.0;
};

/// Forward messages leader->fv1, ..., fv_{n-1}->fv_n, in that order.
/// `iterates` is indexed by platoon index and holds n+1 entries.
std::vector<IterationMessage> exchange_forward(std::span<const ChannelValues> iterates, int iteration_index);

/// Backward messages fv2->fv1, ..., fv_n->fv_{n-1}. The leader never receives.
std::vector<IterationMessage> exchange_backward(std::span<const ChannelValues> iterates, int iteration_index);

/// Forward then backward messages of one iteration (2n-1 messages).
std::vector<IterationMessage> exchange(std::span<const ChannelValues> iterates, int iteration_index);

/// Adds bias[channel](iteration_index, sender-1) to every carried channel.
/// Messages sent by the leader are returned unchanged.
IterationMessage apply_bias(const IterationMessage& msg, const BiasMatrices& bias);

/// Suppresses messages from `sender` in `direction` for control steps
/// [step_start, step_end] and iteration steps [iteration_start, iteration_end].
struct DropRule {
    int sender = 1;
    Direction direction = Direction::Forward;
    int step_start = 0;
    int step_end = 0;
    int iteration_start = 0;
    int iteration_end = 1 << 30;

    [[nodiscard]] bool matches(const IterationMessage& msg, int control_step) const noexcept {
        return msg.sender == sender && msg.direction == direction && step_start <= control_step &&
               control_step <= step_end && iteration_start <= msg.iteration_index && msg.iteration_index <= iteration_end;
    }
};

/// The single injection point between vehicles.
///
/// Delivery applies the step's bias matrices; a dropped message is replaced
/// by the last value the receiver got on that link. If nothing was ever
/// delivered on the link the message passes through.
class V2VChannel {
public:
    V2VChannel() = default;
    explicit V2VChannel(std::vector<DropRule> drops) : drops_(std::move(drops)) {}

    /// Installs the bias for control step k. The matrices must outlive the step.
    void begin_step(int control_step, const BiasMatrices* bias) noexcept {
        control_step_ = control_step;
        bias_ = bias;
    }

    IterationMessage deliver(const IterationMessage& msg);
    std::vector<IterationMessage> deliver(std::span<const IterationMessage> msgs);

    [[nodiscard]] int dropped_count() const noexcept { return dropped_; }

private:
    std::vector<DropRule> drops_;
    std::map<std::pair<int, Direction>, IterationMessage> last_;
    const BiasMatrices* bias_ = nullptr;
    int control_step_ = 0;
    int dropped_ = 0;
};

}  // namespace platoon
