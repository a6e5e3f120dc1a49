#ifndef MPPGEO_CLI_HPP
#define MPPGEO_CLI_HPP

#include "mppgeo/homogeneous_mpp.hpp"
#include "mppgeo/landmark_mpp.hpp"
#include "mppgeo/lie_mpp.hpp"
#include "mppgeo/mpp_engine.hpp"
#include "mppgeo/stochastic_sim.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mppgeo::cli {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

struct Overrides {
  std::optional<int> steps;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

/// Parses a config file and checks it against the schema. Throws ConfigError.
json load_config(const std::string& path);
/// Rejects unknown keys at every level and requires "preset".
void validate_config(const json& config);
void apply_overrides(json& config, const Overrides& overrides);

Vec parse_vector(const json& value, const std::string& what);
/// Nested rows; a flat array is read as a diagonal.
Mat parse_matrix(const json& value, const std::string& what);
CovarianceSchedule parse_sigma(const json& config, int rank);
ManifoldModel parse_manifold(const json& config);
DriftModel parse_chart_drift(const json& config, const ManifoldModel& model);
LieGroupModel parse_group(const json& config);
HomogeneousModel parse_sphere(const json& config);
LandmarkSystem parse_landmarks(const json& config);
Mat parse_landmark_targets(const json& config, const LandmarkSystem& system);
ShootingConfig parse_solver(const json& config);
SimConfig parse_simulation(const json& config);
double config_horizon(const json& config);
int config_steps(const json& config, int fallback);

/// Compact JSON with shortest round-trip doubles, newline terminated.
void write_json(const std::string& path, const json& value);
json read_json(const std::string& path);
/// Numbers with 17 significant digits.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

json matrix_json(const Mat& m);
json vector_json(const Vec& v);

/// Entry point: returns 0 on success, 1 for configuration errors, 2 for
/// NonConvergence, 3 for other numerical failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mppgeo::cli

#endif  // MPPGEO_CLI_HPP
