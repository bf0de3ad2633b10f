#include "platoon/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "platoon/errors.hpp"

namespace platoon {

std::optional<double> time_headway(double gap, double v, double vehicle_length) noexcept {
    if (!(v > 0.0)) return std::nullopt;
    return (gap - vehicle_length) / v;
}

std::string_view to_string(ImpactClass c) noexcept {
    switch (c) {
        case ImpactClass::None: return "None";
        case ImpactClass::SafetyDegradation: return "SafetyDegradation";
        case ImpactClass::EfficiencyDegradation: return "EfficiencyDegradation";
        case ImpactClass::StringInstability: return "StringInstability";
    }
    return "?";
}

void MetricsConfig::validate() const {
    if (!(safe_lo < safe_hi)) throw ConfigError("metrics: safe_lo must be < safe_hi");
    if (!(accel_lo < accel_hi)) throw ConfigError("metrics: accel_lo must be < accel_hi");
    if (warmup < 0) throw ConfigError("metrics: warmup must be >= 0");
}

ImpactClass classify_impact(std::span<const std::optional<double>> headway, double safe_lo, double safe_hi,
                            int warmup) {
    bool below = false;
    bool above = false;
    for (std::size_t k = static_cast<std::size_t>(std::max(warmup, 0)); k < headway.size(); ++k) {
        if (!headway[k]) continue;
        below = below || *headway[k] < safe_lo;
        above = above || *headway[k] > safe_hi;
    }
    if (below && above) return ImpactClass::StringInstability;
    if (below) return ImpactClass::SafetyDegradation;
    if (above) return ImpactClass::EfficiencyDegradation;
    return ImpactClass::None;
}

namespace {

template <class Outside>
std::vector<StepInterval> runs(std::size_t begin, std::size_t end, Outside outside) {
    std::vector<StepInterval> out;
    for (std::size_t k = begin; k < end; ++k) {
        if (!outside(k)) continue;
        const int step = static_cast<int>(k);
        if (!out.empty() && out.back().last == step - 1) {
            out.back().last = step;
        } else {
            out.push_back({step, step});
        }
    }
    return out;
}

}  // namespace

std::vector<StepInterval> acceleration_envelope(std::span<const double> accel, double lo, double hi) {
    return runs(0, accel.size(), [&](std::size_t k) { return !(accel[k] >= lo && accel[k] <= hi); });
}

std::vector<StepInterval> headway_violations(std::span<const std::optional<double>> headway, double safe_lo,
                                             double safe_hi, int warmup) {
    return runs(static_cast<std::size_t>(std::max(warmup, 0)), headway.size(), [&](std::size_t k) {
        return headway[k] && (*headway[k] < safe_lo || *headway[k] > safe_hi);
    });
}

ImpactReport build_impact_report(const std::vector<std::vector<std::optional<double>>>& headway,
                                 const std::vector<std::vector<double>>& acceleration, const MetricsConfig& cfg) {
    if (headway.size() != acceleration.size()) {
        throw ContractError("build_impact_report: one headway and one acceleration series per follower");
    }
    ImpactReport r;
    r.config = cfg;
    for (std::size_t i = 0; i < headway.size(); ++i) {
        VehicleImpact v;
        v.vehicle = static_cast<int>(i) + 1;
        v.headway = headway[i];
        v.acceleration = acceleration[i];
        v.classification = classify_impact(v.headway, cfg.safe_lo, cfg.safe_hi, cfg.warmup);
        v.headway_violations = headway_violations(v.headway, cfg.safe_lo, cfg.safe_hi, cfg.warmup);
        // Warmup is excluded here as well; the initial transient is not attack impact.
        const std::size_t from = std::min(static_cast<std::size_t>(std::max(cfg.warmup, 0)), v.acceleration.size());
        v.acceleration_violations = acceleration_envelope(std::span(v.acceleration).subspan(from), cfg.accel_lo, cfg.accel_hi);
        for (auto& iv : v.acceleration_violations) {
            iv.first += static_cast<int>(from);
            iv.last += static_cast<int>(from);
        }
        for (std::size_t k = from; k < v.headway.size(); ++k) {
            if (!v.headway[k]) continue;
            const double h = *v.headway[k];
            v.min_headway = v.min_headway ? std::min(*v.min_headway, h) : h;
            v.max_headway = v.max_headway ? std::max(*v.max_headway, h) : h;
        }
        r.vehicles.push_back(std::move(v));
    }
    return r;
}

namespace {

nlohmann::json intervals(const std::vector<StepInterval>& v) {
    auto a = nlohmann::json::array();
    for (const auto& iv : v) a.push_back({iv.first, iv.last});
    return a;
}

nlohmann::json opt(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const ImpactReport& report) {
    nlohmann::json j;
    j["safe_lo"] = report.config.safe_lo;
    j["safe_hi"] = report.config.safe_hi;
    j["warmup"] = report.config.warmup;
    j["accel_lo"] = report.config.accel_lo;
    j["accel_hi"] = report.config.accel_hi;
    auto vs = nlohmann::json::array();
    for (const auto& v : report.vehicles) {
        vs.push_back({{"vehicle", v.vehicle},
                      {"classification", std::string(to_string(v.classification))},
                      {"min_headway", opt(v.min_headway)},
                      {"max_headway", opt(v.max_headway)},
                      {"headway_violations", intervals(v.headway_violations)},
                      {"acceleration_violations", intervals(v.acceleration_violations)}});
    }
    j["vehicles"] = vs;
    return j;
}

}  // namespace platoon
