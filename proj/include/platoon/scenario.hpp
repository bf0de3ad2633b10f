#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "platoon/attack.hpp"
#include "platoon/detection.hpp"
#include "platoon/metrics.hpp"
#include "platoon/model.hpp"
#include "platoon/v2v.hpp"

namespace platoon {

/// Leader acceleration from `start_step` until the next segment starts.
struct LeaderSegment {
    int start_step = 0;
    double acceleration = 0.0;
    bool operator==(const LeaderSegment&) const = default;
};

struct OutputFlags {
    bool trace = true;
    bool anomalies = true;
    bool report = true;
    bool impact_csv = true;
};

struct Scenario {
    std::uint64_t seed = 0;
    SimConfig sim;
    double initial_speed = 30.0;
    std::vector<LeaderSegment> leader_profile;  ///< empty = constant speed
    AttackCase attack;
    std::vector<DropRule> drops;
    DetectionConfig detection;
    MetricsConfig metrics;
    OutputFlags output;

    /// Leader acceleration commanded for control step k.
    [[nodiscard]] double leader_accel(int k) const noexcept;

    /// Cross-section checks: sim, detection, metrics, victims <= n, profile
    /// sorted and keeping the leader within [v_min, v_max]. Throws ConfigError.
    void validate() const;
};

/// Unknown keys are rejected so typos do not silently fall back to defaults.
/// Throws ParseError / ConfigError.
Scenario parse_scenario(const nlohmann::json& doc);
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

/// Fully resolved document; parse_scenario(to_json(s)) == s field for field.
nlohmann::json to_json(const Scenario& s);

/// Reads "detection" (and "seed" when present) from a document, ignoring
/// every other key. Accepts the resolved scenario written by a run.
DetectionConfig parse_detection_config(const nlohmann::json& doc);

}  // namespace platoon
