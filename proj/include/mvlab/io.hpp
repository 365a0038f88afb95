#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mvlab/measure.hpp"
#include "mvlab/model.hpp"
#include "mvlab/simulate.hpp"

namespace mvlab {

using Json = nlohmann::ordered_json;

/// Shortest round-trip decimal text of a double.
std::string format_double(double v);

/// CSV with header `t,w,x1[,x2,x3]`, one particle per row.
void write_cloud_csv(const ParticleCloud& mu, const std::filesystem::path& path);
ParticleCloud read_cloud_csv(const std::filesystem::path& path);

/// Binary dump: "MVPC1", u32 d, u64 N, f64 time, then little-endian f64
/// columns (weights first, then one column per coordinate).
void write_cloud_binary(const ParticleCloud& mu, const std::filesystem::path& path);
ParticleCloud read_cloud_binary(const std::filesystem::path& path);

/// {"d","m","T","drift","diffusion"[,"coupled_drift","coupled_diffusion","trunc_radius"]}
Json model_to_json(const ModelSpec& ms);
ModelSpec model_from_json(const Json& j);

Json sim_config_to_json(const SimConfig& cfg);
/// Missing keys keep the values in `defaults`; unknown keys are rejected.
SimConfig sim_config_from_json(const Json& j, const SimConfig& defaults = {});

/// Directory with snap_000000.csv ... (plus coupled_000000.csv ... for
/// coupled runs) and manifest.json.
void export_trajectory(const Trajectory& traj, const std::filesystem::path& dir);
Trajectory import_trajectory(const std::filesystem::path& dir);

/// git describe of the build.
const char* build_version() noexcept;

/// Writes pretty JSON with a trailing newline.
void write_json(const Json& j, const std::filesystem::path& path);
Json read_json(const std::filesystem::path& path);

/// Rejects keys outside `allowed`, naming the context in the message.
void require_known_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& context);

}  // namespace mvlab
