#include "doctest.h"
#include "test_util.hpp"

#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace mppgeo;
using cli::json;
using testutil::vec;

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "mppgeo");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mppgeo_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string config_path(const std::string& name) { return std::string(MPPGEO_CONFIG_DIR) + "/" + name + ".json"; }

fs::path write_config(const fs::path& dir, const json& config) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << config.dump(2);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("schema accepts every shipped preset") {
  for (const auto& entry : fs::directory_iterator(MPPGEO_CONFIG_DIR)) {
    INFO(entry.path().string());
    CHECK_NOTHROW(cli::load_config(entry.path().string()));
  }
}

TEST_CASE("schema rejects unknown keys at any depth") {
  json c = cli::load_config(config_path("so3_drift_ivp"));
  c["colour"] = "red";
  CHECK_THROWS_AS(cli::validate_config(c), ConfigError);
  c.erase("colour");
  c["group"]["size"] = 3;
  CHECK_THROWS_AS(cli::validate_config(c), ConfigError);

  const fs::path dir = scratch("unknown");
  json l = cli::load_config(config_path("landmarks_two_fields"));
  l["landmarks"]["fields"][0]["colour"] = 1;
  const RunResult r = run({"landmarks-bvp", "--config", write_config(dir, l).string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("unknown key") != std::string::npos);
}

TEST_CASE("configuration failures exit with 1") {
  CHECK(run({"so3-ivp", "--config", "/nonexistent/config.json"}).code == 1);
  CHECK(run({"so3-ivp"}).code == 1);
  CHECK(run({"so3-ivp", "--config", config_path("so3_drift_ivp"), "--bogus"}).code == 1);
  CHECK(run({"no-such-command"}).code == 1);

  const fs::path dir = scratch("badvalue");
  json c = cli::load_config(config_path("so3_drift_ivp"));
  c["initial_momentum"] = json::array({1.0, 2.0});
  CHECK(run({"so3-ivp", "--config", write_config(dir, c).string()}).code == 1);
  c = cli::load_config(config_path("so3_drift_ivp"));
  c["sigma"] = "wide";
  CHECK(run({"so3-ivp", "--config", write_config(dir, c).string()}).code == 1);
}

TEST_CASE("solver failure exits with 2") {
  const fs::path dir = scratch("nonconv");
  json c = cli::load_config(config_path("landmarks_grid"));
  c["solver"] = {{"max_iter", 1}, {"restarts", json::array()}, {"tol", 1e-14}};
  c["output"] = (dir / "run").string();
  const RunResult r = run({"landmarks-bvp", "--config", write_config(dir, c).string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("NonConvergence") != std::string::npos);
}

TEST_CASE("trajectory JSON round-trips every double exactly") {
  const fs::path dir = scratch("roundtrip");
  const RunResult r = run({"so3-ivp", "--config", config_path("so3_drift_ivp"), "--out", (dir / "ivp").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("so3-ivp so3-drift-ivp: residual=", 0) == 0);

  const json traj = cli::read_json((dir / "ivp.traj.json").string());
  CHECK(traj.at("header").at("command") == "so3-ivp");
  CHECK(traj.at("header").at("version") == cli::kVersion);
  const json config = traj.at("header").at("config");
  const LieTrajectory tr =
      integrate_group(cli::parse_group(config), cli::parse_vector(config.at("initial_momentum"), "m"),
                      cli::config_horizon(config), cli::config_steps(config, 1000));
  const json& gamma = traj.at("states").at("group").at("gamma");
  REQUIRE(gamma.size() == tr.states.size());
  bool exact = true;
  for (std::size_t k = 0; k < tr.states.size(); ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) exact = exact && gamma[k][i][j].get<double>() == tr.states[k].gamma(i, j);
  CHECK(exact);
  CHECK(traj.at("t").back().get<double>() == tr.times.back());

  // Re-serializing the parsed document reproduces the file byte for byte.
  CHECK(traj.dump() + "\n" == slurp(dir / "ivp.traj.json"));

  const std::string csv = slurp(dir / "ivp.csv");
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  CHECK(header.rfind("t,gamma_0_0,", 0) == 0);
  int rows = 0;
  for (std::string line; std::getline(lines, line);) ++rows;
  CHECK(rows == static_cast<int>(tr.times.size()));
}

TEST_CASE("re-running a preset rewrites identical files") {
  const fs::path dir = scratch("idempotent");
  const std::string prefix = (dir / "sim").string();
  REQUIRE(run({"simulate", "--config", config_path("flat_simulate"), "--out", prefix}).code == 0);
  const std::string a = slurp(prefix + ".samples.json");
  const std::string ac = slurp(prefix + ".csv");
  REQUIRE(run({"simulate", "--config", config_path("flat_simulate"), "--out", prefix}).code == 0);
  CHECK(a == slurp(prefix + ".samples.json"));
  CHECK(ac == slurp(prefix + ".csv"));

  REQUIRE(run({"sphere-bvp", "--config", config_path("sphere_geodesic"), "--out", prefix}).code == 0);
  const std::string b = slurp(prefix + ".traj.json");
  REQUIRE(run({"sphere-bvp", "--config", config_path("sphere_geodesic"), "--out", prefix}).code == 0);
  CHECK(b == slurp(prefix + ".traj.json"));
}

TEST_CASE("command-line overrides") {
  const fs::path dir = scratch("overrides");
  const std::string prefix = (dir / "o").string();
  REQUIRE(run({"so3-ivp", "--config", config_path("so3_drift_ivp"), "--steps", "50", "--out", prefix}).code == 0);
  const json traj = cli::read_json(prefix + ".traj.json");
  CHECK(traj.at("t").size() == 51);
  CHECK(traj.at("header").at("config").at("steps") == 50);

  json c = cli::load_config(config_path("flat_simulate"));
  c["simulation"]["paths"] = 20;
  const std::string cfg = write_config(dir, c).string();
  REQUIRE(run({"simulate", "--config", cfg, "--seed", "1", "--steps", "10", "--out", prefix}).code == 0);
  const json s1 = cli::read_json(prefix + ".samples.json");
  REQUIRE(run({"simulate", "--config", cfg, "--seed", "2", "--steps", "10", "--out", prefix}).code == 0);
  const json s2 = cli::read_json(prefix + ".samples.json");
  CHECK(s1.at("header").at("config").at("seed") == 1);
  CHECK(s1 != s2);

  REQUIRE(run({"sphere-bvp", "--config", config_path("sphere_geodesic"), "--tol", "1e-3", "--out", prefix}).code == 0);
  CHECK(cli::read_json(prefix + ".traj.json").at("header").at("config").at("solver").at("tol") == 1e-3);
}

TEST_CASE("singular-check writes the infinity sentinel as a string") {
  const fs::path dir = scratch("sentinel");
  const std::string prefix = (dir / "s").string();
  REQUIRE(run({"singular-check", "--config", config_path("so3_drift_ivp"), "--out", prefix}).code == 0);
  const json cert = cli::read_json(prefix + ".traj.json").at("diagnostics").at("certificate");
  CHECK(cert.at("subject") == "group");
  CHECK(cert.at("min_singular_value") == "inf");
  CHECK(cert.at("is_singular") == false);

  REQUIRE(run({"singular-check", "--config", config_path("singular_heisenberg"), "--out", prefix}).code == 0);
  const json h = cli::read_json(prefix + ".traj.json").at("diagnostics").at("certificate");
  CHECK(h.at("subject") == "manifold");
  CHECK(h.at("is_singular") == true);

  REQUIRE(run({"singular-check", "--config", config_path("singular_landmarks"), "--out", prefix}).code == 0);
  CHECK(cli::read_json(prefix + ".traj.json").at("diagnostics").at("certificate").at("is_singular") == true);
}

TEST_CASE("landmark output carries the scene") {
  const fs::path dir = scratch("scene");
  const std::string prefix = (dir / "l").string();
  REQUIRE(run({"landmarks-bvp", "--config", config_path("landmarks_grid"), "--out", prefix}).code == 0);
  const json traj = cli::read_json(prefix + ".traj.json");
  CHECK(traj.at("scene").at("field_centers").size() == 49);
  CHECK(traj.at("scene").at("field_count") == 98);
  CHECK(traj.at("scene").at("initial").size() == 8);
  CHECK(traj.at("diagnostics").at("residual").get<double>() < 1e-6);
}

TEST_CASE("parsers") {
  CHECK((cli::parse_matrix(json::array({1.0, 4.0}), "m") - testutil::diag({1.0, 4.0})).norm() == 0.0);
  CHECK_THROWS_AS(cli::parse_matrix(json::array({json::array({1.0, 2.0}), json::array({1.0})}), "m"), ConfigError);
  CHECK_THROWS_AS(cli::parse_vector(json::array({1.0, "x"}), "v"), ConfigError);
  const json c = json::parse(R"({"preset": "p", "landmarks": {
      "initial": {"circle": {"n": 4, "center": [0, 0], "rx": 1, "ry": 1, "phase": 0.5}},
      "fields": [{"kind": "constant", "value": [1, 0]}]}})");
  const LandmarkSystem s = cli::parse_landmarks(c);
  CHECK(s.n() == 4);
  CHECK((s.initial.row(0).transpose() - vec({std::cos(0.5), std::sin(0.5)})).norm() < 1e-15);
}
