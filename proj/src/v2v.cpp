#include "platoon/v2v.hpp"

#include <algorithm>

namespace platoon {

std::vector<IterationMessage> exchange_forward(std::span<const ChannelValues> iterates, int iteration_index) {
    std::vector<IterationMessage> out;
    if (iterates.size() < 2) return out;
    out.reserve(iterates.size() - 1);
    for (std::size_t s = 0; s + 1 < iterates.size(); ++s) {
        IterationMessage m;
        m.sender = static_cast<int>(s);
        m.receiver = static_cast<int>(s + 1);
        m.iteration_index = iteration_index;
        m.direction = Direction::Forward;
        m.x_ite = iterates[s].x_ite;
        m.v_ite = iterates[s].v_ite;
        out.push_back(m);
    }
    return out;
}

std::vector<IterationMessage> exchange_backward(std::span<const ChannelValues> iterates, int iteration_index) {
    std::vector<IterationMessage> out;
    if (iterates.size() < 3) return out;
    out.reserve(iterates.size() - 2);
    for (std::size_t s = 2; s < iterates.size(); ++s) {
        IterationMessage m;
        m.sender = static_cast<int>(s);
        m.receiver = static_cast<int>(s - 1);
        m.iteration_index = iteration_index;
        m.direction = Direction::Backward;
        m.zx_ite = iterates[s].zx_ite;
        m.zv_ite = iterates[s].zv_ite;
        out.push_back(m);
    }
    return out;
}

std::vector<IterationMessage> exchange(std::span<const ChannelValues> iterates, int iteration_index) {
    auto out = exchange_forward(iterates, iteration_index);
    auto back = exchange_backward(iterates, iteration_index);
    out.insert(out.end(), back.begin(), back.end());
    return out;
}

IterationMessage apply_bias(const IterationMessage& msg, const BiasMatrices& bias) {
    if (msg.sender < 1 || msg.sender > bias.cols()) return msg;
    IterationMessage out = msg;
    const Eigen::Index t = msg.iteration_index;
    const Eigen::Index col = msg.sender - 1;
    if (msg.direction == Direction::Forward) {
        out.x_ite += bias.x_ite(t, col);
        out.v_ite += bias.v_ite(t, col);
    } else {
        out.zx_ite += bias.zx_ite(t, col);
        out.zv_ite += bias.zv_ite(t, col);
    }
    return out;
}

IterationMessage V2VChannel::deliver(const IterationMessage& msg) {
    const auto key = std::make_pair(msg.sender, msg.direction);
    const bool dropped =
        std::any_of(drops_.begin(), drops_.end(), [&](const DropRule& r) { return r.matches(msg, control_step_); });
    if (dropped) {
        auto it = last_.find(key);
        if (it != last_.end()) {
            ++dropped_;
            IterationMessage reused = it->second;
            reused.iteration_index = msg.iteration_index;
            return reused;
        }
    }
    IterationMessage out = bias_ != nullptr ? apply_bias(msg, *bias_) : msg;
    last_[key] = out;
    return out;
}

std::vector<IterationMessage> V2VChannel::deliver(std::span<const IterationMessage> msgs) {
    std::vector<IterationMessage> out;
    out.reserve(msgs.size());
    for (const auto& m : msgs) out.push_back(deliver(m));
    return out;
}

}  // namespace platoon
