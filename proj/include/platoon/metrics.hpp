#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace platoon {

/// (gap - vehicle_length) / v; nullopt when v <= 0.
[[nodiscard]] std::optional<double> time_headway(double gap, double v, double vehicle_length) noexcept;

enum class ImpactClass { None, SafetyDegradation, EfficiencyDegradation, StringInstability };
std::string_view to_string(ImpactClass c) noexcept;

struct MetricsConfig {
    double safe_lo = 0.45;  ///< s
    double safe_hi = 0.55;  ///< s
    int warmup = 10;        ///< control steps excluded from classification
    double accel_lo = -1.5;
    double accel_hi = 1.0;

    /// Throws ConfigError.
    void validate() const;
};

/// Classifies one headway series (index = control step). Entries before
/// `warmup` and undefined entries (nullopt) are ignored.
ImpactClass classify_impact(std::span<const std::optional<double>> headway, double safe_lo, double safe_hi,
                            int warmup);

/// Closed control-step range [first, last].
struct StepInterval {
    int first = 0;
    int last = 0;
    bool operator==(const StepInterval&) const = default;
};

/// Maximal runs of steps whose acceleration lies outside [lo, hi].
std::vector<StepInterval> acceleration_envelope(std::span<const double> accel, double lo = -1.5, double hi = 1.0);

/// Maximal runs of defined headways outside [safe_lo, safe_hi], after warmup.
std::vector<StepInterval> headway_violations(std::span<const std::optional<double>> headway, double safe_lo,
                                             double safe_hi, int warmup);

struct VehicleImpact {
    int vehicle = 1;
    std::vector<std::optional<double>> headway;
    std::vector<double> acceleration;
    ImpactClass classification = ImpactClass::None;
    std::vector<StepInterval> headway_violations;
    std::vector<StepInterval> acceleration_violations;
    std::optional<double> min_headway;
    std::optional<double> max_headway;
};

struct ImpactReport {
    MetricsConfig config;
    std::vector<VehicleImpact> vehicles;  ///< fv1 .. fvn
};

/// Builds the report from per-vehicle series (outer index = follower).
ImpactReport build_impact_report(const std::vector<std::vector<std::optional<double>>>& headway,
                                 const std::vector<std::vector<double>>& acceleration, const MetricsConfig& cfg);

/// Summary without the raw series (those go to the CSV).
nlohmann::json to_json(const ImpactReport& report);

}  // namespace platoon
