#include "platoon/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "platoon/errors.hpp"

namespace platoon {

using nlohmann::json;

std::string_view to_string(Channel channel) noexcept {
    switch (channel) {
        case Channel::XIte: return "x_ite";
        case Channel::VIte: return "v_ite";
        case Channel::ZxIte: return "zx_ite";
        case Channel::ZvIte: return "zv_ite";
    }
    return "?";
}

Channel channel_from_string(std::string_view name) {
    for (Channel c : kAllChannels) {
        if (to_string(c) == name) return c;
    }
    throw ParseError("unknown channel '" + std::string(name) + "'");
}

std::string_view to_string(FrequencyKind kind) noexcept {
    return kind == FrequencyKind::Continuous ? "Continuous" : "Cluster";
}

std::string_view to_string(BiasKind kind) noexcept {
    switch (kind) {
        case BiasKind::Constant: return "Constant";
        case BiasKind::Linear: return "Linear";
        case BiasKind::Sinusoidal: return "Sinusoidal";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::string path(std::string_view list, std::initializer_list<std::size_t> idx) {
    std::ostringstream os;
    os << list;
    for (auto i : idx) os << '[' << i << ']';
    return os.str();
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ParseError(where + ": " + what);
}

const json& expect_array(const json& node, const std::string& where, std::size_t expected_size) {
    if (!node.is_array()) fail(where, "expected a list");
    if (node.size() != expected_size) {
        fail(where, "expected " + std::to_string(expected_size) + " entries to match the nesting of the other lists, got " +
                        std::to_string(node.size()));
    }
    return node;
}

double as_number(const json& node, const std::string& where) {
    if (!node.is_number()) fail(where, "expected a number");
    double v = node.get<double>();
    if (!std::isfinite(v)) fail(where, "value must be finite");
    return v;
}

int as_int(const json& node, const std::string& where) {
    double v = as_number(node, where);
    if (v != std::floor(v) || std::abs(v) > 1e9) fail(where, "expected an integer");
    return static_cast<int>(v);
}

std::string as_string(const json& node, const std::string& where) {
    if (!node.is_string()) fail(where, "expected a string");
    return node.get<std::string>();
}

FrequencyKind parse_frequency(const std::string& name, const json& params, const std::string& where,
                              FrequencyWindow& window) {
    if (!params.is_array()) fail(where, "expected a parameter list");
    if (name == "Continuous") {
        if (params.size() != 1) fail(where, "Continuous takes exactly one parameter ([0])");
        as_number(params[0], where + "[0]");
        return FrequencyKind::Continuous;
    }
    if (name == "Cluster") {
        if (params.size() != 2) fail(where, "Cluster takes [on, off]");
        window.on = as_int(params[0], where + "[0]");
        window.off = as_int(params[1], where + "[1]");
    } else if (name == "Discrete") {
        // Cluster with a single-step on window: [off] or [1, off].
        if (params.size() == 1) {
            window.on = 1;
            window.off = as_int(params[0], where + "[0]");
        } else if (params.size() == 2) {
            window.on = as_int(params[0], where + "[0]");
            window.off = as_int(params[1], where + "[1]");
            if (window.on != 1) fail(where, "Discrete requires on = 1");
        } else {
            fail(where, "Discrete takes [off] or [1, off]");
        }
    } else {
        fail(where, "unknown frequency type '" + name + "'");
    }
    if (window.on < 1) fail(where, "Cluster on window must be >= 1");
    if (window.off < 0) fail(where, "Cluster off window must be >= 0");
    return FrequencyKind::Cluster;
}

BiasKind parse_bias(const std::string& name, const json& params, const std::string& where, BiasParams& out) {
    if (!params.is_array()) fail(where, "expected a parameter list");
    auto arity = [&](std::size_t n) {
        if (params.size() != n) {
            fail(where, name + " bias takes " + std::to_string(n) + " parameters, got " + std::to_string(params.size()));
        }
    };
    auto num = [&](std::size_t i) { return as_number(params[i], where + "[" + std::to_string(i) + "]"); };
    if (name == "Constant") {
        arity(1);
        out.c = num(0);
        return BiasKind::Constant;
    }
    if (name == "Linear") {
        arity(2);
        out.slope = num(0);
        out.c = num(1);
        return BiasKind::Linear;
    }
    if (name == "Sinusoidal") {
        arity(4);
        out.amplitude = num(0);
        out.frequency = num(1);
        out.theta = num(2);
        out.c = num(3);
        return BiasKind::Sinusoidal;
    }
    fail(where, "unknown bias type '" + name + "'");
}

const json& member(const json& doc, const char* key) {
    auto it = doc.find(key);
    if (it == doc.end()) fail(key, "missing list");
    return *it;
}

}  // namespace

AttackCase parse_attack_case(const json& doc) {
    if (!doc.is_object()) throw ParseError("attack case: expected an object holding the seven lists");
    static constexpr std::string_view known[] = {
        "iter_victim_list",   "control_attackperiod_list", "iter_malichannel_list",   "iter_freq_type_list",
        "iter_freqparavalue_list", "iter_biastype_list",   "iter_biasparavalue_list"};
    for (const auto& [key, value] : doc.items()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw ConfigError("attack case: unknown key '" + key + "'");
        }
    }
    AttackCase result;
    auto victims_it = doc.find("iter_victim_list");
    if (victims_it == doc.end() || (victims_it->is_array() && victims_it->empty())) {
        return result;
    }
    const json& victims = *victims_it;
    if (!victims.is_array()) fail("iter_victim_list", "expected a list");
    const std::size_t nv = victims.size();

    const json& periods = expect_array(member(doc, "control_attackperiod_list"), "control_attackperiod_list", nv);
    const json& channels = expect_array(member(doc, "iter_malichannel_list"), "iter_malichannel_list", nv);
    const json& ftypes = expect_array(member(doc, "iter_freq_type_list"), "iter_freq_type_list", nv);
    const json& fparams = expect_array(member(doc, "iter_freqparavalue_list"), "iter_freqparavalue_list", nv);
    const json& btypes = expect_array(member(doc, "iter_biastype_list"), "iter_biastype_list", nv);
    const json& bparams = expect_array(member(doc, "iter_biasparavalue_list"), "iter_biasparavalue_list", nv);

    for (std::size_t i = 0; i < nv; ++i) {
        VictimAttack va;
        va.victim = as_int(victims[i], path("iter_victim_list", {i}));
        if (va.victim < 1) fail(path("iter_victim_list", {i}), "victim index must be >= 1");

        if (!periods[i].is_array()) fail(path("control_attackperiod_list", {i}), "expected a list of [start, end]");
        const std::size_t np = periods[i].size();
        const std::string victim_note = " (victim " + std::to_string(i) + ", fv" + std::to_string(va.victim) + ")";
        auto per_victim = [&](const json& list, std::string_view name) -> const json& {
            return expect_array(list[i], path(name, {i}) + victim_note, np);
        };
        const json& ch_i = per_victim(channels, "iter_malichannel_list");
        const json& ft_i = per_victim(ftypes, "iter_freq_type_list");
        const json& fp_i = per_victim(fparams, "iter_freqparavalue_list");
        const json& bt_i = per_victim(btypes, "iter_biastype_list");
        const json& bp_i = per_victim(bparams, "iter_biasparavalue_list");

        for (std::size_t j = 0; j < np; ++j) {
            AttackPeriod period;
            const json& interval = periods[i][j];
            const std::string ipath = path("control_attackperiod_list", {i, j});
            if (!interval.is_array() || interval.size() != 2) fail(ipath, "expected [start, end]");
            period.start = as_int(interval[0], ipath + "[0]");
            period.end = as_int(interval[1], ipath + "[1]");
            if (period.start > period.end) fail(ipath, "start must be <= end");

            if (!ch_i[j].is_array()) fail(path("iter_malichannel_list", {i, j}), "expected a list of channels");
            const std::size_t nc = ch_i[j].size();
            const json& ft_ij = expect_array(ft_i[j], path("iter_freq_type_list", {i, j}), nc);
            const json& fp_ij = expect_array(fp_i[j], path("iter_freqparavalue_list", {i, j}), nc);
            const json& bt_ij = expect_array(bt_i[j], path("iter_biastype_list", {i, j}), nc);
            const json& bp_ij = expect_array(bp_i[j], path("iter_biasparavalue_list", {i, j}), nc);

            for (std::size_t m = 0; m < nc; ++m) {
                ChannelAttack ca;
                const std::string cpath = path("iter_malichannel_list", {i, j, m});
                try {
                    ca.channel = channel_from_string(as_string(ch_i[j][m], cpath));
                } catch (const ParseError& e) {
                    fail(cpath, e.what());
                }
                ca.frequency = parse_frequency(as_string(ft_ij[m], path("iter_freq_type_list", {i, j, m})), fp_ij[m],
                                               path("iter_freqparavalue_list", {i, j, m}), ca.window);
                ca.bias = parse_bias(as_string(bt_ij[m], path("iter_biastype_list", {i, j, m})), bp_ij[m],
                                     path("iter_biasparavalue_list", {i, j, m}), ca.params);
                period.channels.push_back(ca);
            }
            va.periods.push_back(std::move(period));
        }
        result.victims.push_back(std::move(va));
    }
    return result;
}

AttackCase parse_attack_case(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("attack case is not valid JSON: ") + e.what());
    }
    if (doc.is_object() && doc.contains("attack") && !doc.contains("iter_victim_list")) {
        return parse_attack_case(doc.at("attack"));
    }
    return parse_attack_case(doc);
}

json to_json(const AttackCase& attack) {
    json victims = json::array(), periods = json::array(), channels = json::array(), ftypes = json::array(),
         fparams = json::array(), btypes = json::array(), bparams = json::array();
    for (const auto& va : attack.victims) {
        victims.push_back(va.victim);
        json p_i = json::array(), c_i = json::array(), ft_i = json::array(), fp_i = json::array(), bt_i = json::array(),
             bp_i = json::array();
        for (const auto& period : va.periods) {
            p_i.push_back({period.start, period.end});
            json c_ij = json::array(), ft_ij = json::array(), fp_ij = json::array(), bt_ij = json::array(),
                 bp_ij = json::array();
            for (const auto& ca : period.channels) {
                c_ij.push_back(std::string(to_string(ca.channel)));
                ft_ij.push_back(std::string(to_string(ca.frequency)));
                fp_ij.push_back(ca.frequency == FrequencyKind::Continuous ? json::array({0})
                                                                          : json::array({ca.window.on, ca.window.off}));
                bt_ij.push_back(std::string(to_string(ca.bias)));
                switch (ca.bias) {
                    case BiasKind::Constant: bp_ij.push_back({ca.params.c}); break;
                    case BiasKind::Linear: bp_ij.push_back({ca.params.slope, ca.params.c}); break;
                    case BiasKind::Sinusoidal:
                        bp_ij.push_back({ca.params.amplitude, ca.params.frequency, ca.params.theta, ca.params.c});
                        break;
                }
            }
            c_i.push_back(c_ij);
            ft_i.push_back(ft_ij);
            fp_i.push_back(fp_ij);
            bt_i.push_back(bt_ij);
            bp_i.push_back(bp_ij);
        }
        periods.push_back(p_i);
        channels.push_back(c_i);
        ftypes.push_back(ft_i);
        fparams.push_back(fp_i);
        btypes.push_back(bt_i);
        bparams.push_back(bp_i);
    }
    return json{{"iter_victim_list", victims},         {"control_attackperiod_list", periods},
                {"iter_malichannel_list", channels},   {"iter_freq_type_list", ftypes},
                {"iter_freqparavalue_list", fparams},  {"iter_biastype_list", btypes},
                {"iter_biasparavalue_list", bparams}};
}

void AttackCase::validate_for(int n) const {
    for (const auto& va : victims) {
        if (va.victim < 1 || va.victim > n) {
            throw ConfigError("attack victim fv" + std::to_string(va.victim) + " outside [1, " + std::to_string(n) + "]");
        }
    }
}

bool AttackCase::active_at(int k) const noexcept {
    for (const auto& va : victims) {
        for (const auto& p : va.periods) {
            if (p.contains(k)) return true;
        }
    }
    return false;
}

// ---------------------------------------------------------------------------
// Generation

BiasMatrices BiasMatrices::zeros(int max_iterations, int n) {
    BiasMatrices b;
    for (Channel c : kAllChannels) b[c] = Eigen::MatrixXd::Zero(max_iterations, n);
    return b;
}

Eigen::MatrixXd& BiasMatrices::operator[](Channel channel) {
    switch (channel) {
        case Channel::XIte: return x_ite;
        case Channel::VIte: return v_ite;
        case Channel::ZxIte: return zx_ite;
        case Channel::ZvIte: return zv_ite;
    }
    return x_ite;
}

const Eigen::MatrixXd& BiasMatrices::operator[](Channel channel) const {
    return const_cast<BiasMatrices&>(*this)[channel];
}

bool BiasMatrices::all_zero() const {
    for (Channel c : kAllChannels) {
        if (!(*this)[c].isZero(0.0)) return false;
    }
    return true;
}

std::vector<std::uint8_t> stealth_mask(FrequencyKind kind, FrequencyWindow window, int max_iterations) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(std::max(max_iterations, 0)), 0);
    if (kind == FrequencyKind::Continuous) {
        std::fill(mask.begin(), mask.end(), std::uint8_t{1});
        return mask;
    }
    if (window.on < 1) throw ConfigError("Cluster on window must be >= 1");
    if (window.off < 0) throw ConfigError("Cluster off window must be >= 0");
    const int period = window.on + window.off;
    for (int t = 0; t < max_iterations; ++t) {
        mask[static_cast<std::size_t>(t)] = (t % period) < window.on ? 1 : 0;
    }
    return mask;
}

double bias_waveform(BiasKind kind, const BiasParams& p, int t, int max_iterations) {
    switch (kind) {
        case BiasKind::Constant: return p.c;
        case BiasKind::Linear: return p.slope * t + p.c;
        case BiasKind::Sinusoidal:
            return p.amplitude *
                       std::sin(2.0 * std::numbers::pi * p.frequency * (static_cast<double>(t) / max_iterations) +
                                p.theta) +
                   p.c;
    }
    return 0.0;
}

std::vector<double> iter_channel_bias(const ChannelAttack& attack, int max_iterations) {
    const auto mask = stealth_mask(attack.frequency, attack.window, max_iterations);
    std::vector<double> out(mask.size(), 0.0);
    for (int t = 0; t < max_iterations; ++t) {
        out[static_cast<std::size_t>(t)] =
            static_cast<double>(mask[static_cast<std::size_t>(t)]) * bias_waveform(attack.bias, attack.params, t, max_iterations);
    }
    return out;
}

BiasMatrices iter_attack_value_cal(int n, int k, int max_iterations, const AttackCase& attack) {
    attack.validate_for(n);
    BiasMatrices out = BiasMatrices::zeros(max_iterations, n);
    for (const auto& va : attack.victims) {
        const Eigen::Index column = va.victim - 1;
        for (const auto& period : va.periods) {
            if (!period.contains(k)) continue;
            for (const auto& ca : period.channels) {
                const auto vec = iter_channel_bias(ca, max_iterations);
                Eigen::MatrixXd& m = out[ca.channel];
                for (int t = 0; t < max_iterations; ++t) m(t, column) += vec[static_cast<std::size_t>(t)];
            }
        }
    }
    return out;
}

}  // namespace platoon
