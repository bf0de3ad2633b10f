#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace platoon {

/// The four iterative V2V channels that can carry an additive bias.
enum class Channel { XIte, VIte, ZxIte, ZvIte };

inline constexpr std::array<Channel, 4> kAllChannels{Channel::XIte, Channel::VIte, Channel::ZxIte, Channel::ZvIte};

std::string_view to_string(Channel channel) noexcept;
/// Accepts "x_ite", "v_ite", "zx_ite", "zv_ite". Throws ParseError otherwise.
Channel channel_from_string(std::string_view name);

enum class FrequencyKind { Continuous, Cluster };
enum class BiasKind { Constant, Linear, Sinusoidal };

std::string_view to_string(FrequencyKind kind) noexcept;
std::string_view to_string(BiasKind kind) noexcept;

/// On/off window of a Cluster mask, in iteration steps. Ignored for Continuous.
struct FrequencyWindow {
    int on = 1;
    int off = 0;
    bool operator==(const FrequencyWindow&) const = default;
};

/// Waveform parameters; which fields matter depends on the BiasKind.
struct BiasParams {
    double c = 0.0;          ///< constant / shift
    double slope = 0.0;      ///< Linear: per iteration step
    double amplitude = 0.0;  ///< Sinusoidal
    double frequency = 0.0;  ///< Sinusoidal: cycles per control step
    double theta = 0.0;      ///< Sinusoidal: phase (rad)
    bool operator==(const BiasParams&) const = default;
};

struct ChannelAttack {
    Channel channel = Channel::XIte;
    FrequencyKind frequency = FrequencyKind::Continuous;
    FrequencyWindow window;
    BiasKind bias = BiasKind::Constant;
    BiasParams params;
    bool operator==(const ChannelAttack&) const = default;
};

/// Closed control-step interval [start, end] and the channels attacked within it.
struct AttackPeriod {
    int start = 0;
    int end = 0;
    std::vector<ChannelAttack> channels;

    [[nodiscard]] bool contains(int k) const noexcept { return start <= k && k <= end; }
    bool operator==(const AttackPeriod&) const = default;
};

struct VictimAttack {
    int victim = 1;  ///< follower index, 1-based (fv1 .. fvn)
    std::vector<AttackPeriod> periods;
    bool operator==(const VictimAttack&) const = default;
};

/// A validated attack case. The JSON form is the seven parallel lists
/// (iter_victim_list, control_attackperiod_list, iter_malichannel_list,
/// iter_freq_type_list, iter_freqparavalue_list, iter_biastype_list,
/// iter_biasparavalue_list); internally the lists are zipped per victim.
struct AttackCase {
    std::vector<VictimAttack> victims;

    [[nodiscard]] bool empty() const noexcept { return victims.empty(); }
    /// Throws ConfigError when a victim index exceeds the follower count.
    void validate_for(int n) const;
    /// True if any victim has a period containing control step k.
    [[nodiscard]] bool active_at(int k) const noexcept;
    bool operator==(const AttackCase&) const = default;
};

/// Parses the seven-list document. A missing or empty iter_victim_list is the benign case.
AttackCase parse_attack_case(const nlohmann::json& doc);
AttackCase parse_attack_case(std::string_view text);
nlohmann::json to_json(const AttackCase& attack);

/// Four (max_iterations x n) additive-bias matrices. Row = iteration step,
/// column j = follower fv_{j+1} whose outgoing channel is corrupted.
struct BiasMatrices {
    Eigen::MatrixXd x_ite;
    Eigen::MatrixXd v_ite;
    Eigen::MatrixXd zx_ite;
    Eigen::MatrixXd zv_ite;

    static BiasMatrices zeros(int max_iterations, int n);

    [[nodiscard]] Eigen::MatrixXd& operator[](Channel channel);
    [[nodiscard]] const Eigen::MatrixXd& operator[](Channel channel) const;
    [[nodiscard]] int rows() const noexcept { return static_cast<int>(x_ite.rows()); }
    [[nodiscard]] int cols() const noexcept { return static_cast<int>(x_ite.cols()); }
    [[nodiscard]] bool all_zero() const;
};

/// 0/1 mask over iteration steps. Continuous: all ones. Cluster {on, off}:
/// period on+off starting at index 0 with the first `on` entries set.
/// Throws ConfigError when on < 1 or off < 0.
std::vector<std::uint8_t> stealth_mask(FrequencyKind kind, FrequencyWindow window, int max_iterations);

/// Constant: c. Linear: slope*t + c. Sinusoidal: A*sin(2*pi*f*t/max_iterations + theta) + c.
double bias_waveform(BiasKind kind, const BiasParams& params, int t, int max_iterations);

/// Elementwise mask * waveform over t = 0 .. max_iterations-1.
std::vector<double> iter_channel_bias(const ChannelAttack& attack, int max_iterations);

/// Bias matrices for control step k: every active (victim, period, channel)
/// contributes its iter_channel_bias to the victim's column; overlaps sum.
BiasMatrices iter_attack_value_cal(int n, int k, int max_iterations, const AttackCase& attack);

}  // namespace platoon
