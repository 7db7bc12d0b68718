#pragma once

#include <filesystem>

#include "actuforge/library.hpp"
#include "actuforge/tasking.hpp"

namespace actuforge {

/// Ten synthetic motors (0.2-0.9 kg), gears 1..12, the eight standard
/// couplings and the four-vertex domain template.
Library fixture_library();

/// 0.15 s single-support window of a walking gait, 150 samples at 1 ms,
/// low-pass filtered at 30 Hz.
TaskTrajectory walking_fixture();

/// 3.6 s snatch-style lift on the pitch joints (3-5), 3600 samples at 1 ms.
TaskTrajectory lifting_fixture();

/// Walking followed by lifting.
TaskTrajectory fixture_tasks();

/// Writes library.json, walking.csv and lifting.csv into `dir`.
void write_fixtures(const std::filesystem::path& dir);

}  // namespace actuforge
