#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "platoon/scenario.hpp"

namespace test {

inline std::filesystem::path data_dir() { return std::filesystem::path(PLATOON_TEST_DATA); }

inline platoon::Scenario scenario_file(const std::string& name) {
    return platoon::load_scenario(data_dir() / "data" / "scenarios" / name);
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("platoon_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace test
