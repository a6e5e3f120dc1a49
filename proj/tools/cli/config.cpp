#include "cli.hpp"

#include "mppgeo/manifolds.hpp"

#include <fstream>
#include <map>
#include <set>

namespace mppgeo::cli {

namespace {

struct Schema {
  std::map<std::string, Schema> keys;
  bool any = false;
};

Schema leaf() {
  Schema s;
  s.any = true;
  return s;
}

Schema object(std::initializer_list<std::pair<const std::string, Schema>> keys) {
  Schema s;
  s.keys = keys;
  return s;
}

const Schema& schema() {
  static const Schema s = [] {
    const Schema circle = object({{"n", leaf()}, {"center", leaf()}, {"rx", leaf()}, {"ry", leaf()}, {"phase", leaf()}});
    const Schema points = object({{"circle", circle}});
    return object({
        {"preset", leaf()},
        {"description", leaf()},
        {"manifold", object({{"kind", leaf()}, {"dim", leaf()}, {"origin", leaf()}})},
        {"group", object({{"kind", leaf()}, {"convention", leaf()}})},
        {"sigma", object({{"times", leaf()}, {"samples", leaf()}})},
        {"drift", object({{"kind", leaf()}, {"value", leaf()}, {"A", leaf()}, {"b", leaf()}, {"axis", leaf()}})},
        {"horizon", leaf()},
        {"steps", leaf()},
        {"initial_momentum", leaf()},
        {"chi0", leaf()},
        {"target", object({{"chart", leaf()},
                           {"ambient", leaf()},
                           {"rotation_vector", leaf()},
                           {"matrix", leaf()},
                           {"from_momentum", leaf()}})},
        {"landmarks", object({{"initial", points},
                              {"targets", points},
                              {"fields", object({{"grid", object({{"per_axis", leaf()},
                                                                  {"width", leaf()},
                                                                  {"inflate", leaf()}})},
                                                 {"kind", leaf()},
                                                 {"center", leaf()},
                                                 {"width", leaf()},
                                                 {"direction", leaf()},
                                                 {"value", leaf()},
                                                 {"A", leaf()},
                                                 {"b", leaf()}})},
                              {"guess", leaf()}})},
        {"solver", object({{"tol", leaf()},
                           {"max_iter", leaf()},
                           {"fd_step", leaf()},
                           {"backtrack", leaf()},
                           {"min_step", leaf()},
                           {"restarts", leaf()},
                           {"max_condition", leaf()}})},
        {"simulation", object({{"paths", leaf()}, {"record_endpoints_only", leaf()}, {"noise_scale", leaf()}})},
        {"seed", leaf()},
        {"output", leaf()},
    });
  }();
  return s;
}

void check(const json& value, const Schema& s, const std::string& path) {
  if (s.any) return;
  if (value.is_object()) {
    for (const auto& [key, child] : value.items()) {
      const auto it = s.keys.find(key);
      if (it == s.keys.end()) throw ConfigError("unknown key '" + (path.empty() ? key : path + "." + key) + "'");
      check(child, it->second, path.empty() ? key : path + "." + key);
    }
  } else if (value.is_array()) {
    for (const json& e : value) check(e, s, path);
  }
}

const json& require(const json& config, const std::string& key) {
  if (!config.contains(key)) throw ConfigError("missing '" + key + "'");
  return config.at(key);
}

double number(const json& v, const std::string& what) {
  if (!v.is_number()) throw ConfigError("'" + what + "' must be a number");
  return v.get<double>();
}

int integer(const json& v, const std::string& what) {
  if (!v.is_number_integer()) throw ConfigError("'" + what + "' must be an integer");
  return v.get<int>();
}

std::string text(const json& v, const std::string& what) {
  if (!v.is_string()) throw ConfigError("'" + what + "' must be a string");
  return v.get<std::string>();
}

std::string kind_of(const json& section, const std::string& what) {
  return text(require(section, "kind"), what + ".kind");
}

Mat points(const json& v, const std::string& what) {
  if (v.is_object()) {
    const json& c = require(v, "circle");
    return circle_scene(integer(require(c, "n"), what + ".circle.n"), parse_vector(require(c, "center"), what + ".center"),
                        number(require(c, "rx"), what + ".circle.rx"), number(require(c, "ry"), what + ".circle.ry"),
                        c.contains("phase") ? number(c.at("phase"), what + ".circle.phase") : 0.0);
  }
  const Mat m = parse_matrix(v, what);
  if (!v.empty() && !v.front().is_array()) throw ConfigError("'" + what + "' must be a list of points");
  return m;
}

std::function<Eigen::Vector3d(double, const Eigen::Vector3d&)> ambient_sphere_field(const json& config) {
  if (!config.contains("drift")) return {};
  const json& d = config.at("drift");
  const std::string kind = kind_of(d, "drift");
  if (kind == "zero") return {};
  if (kind == "sphere-preset") return [](double, const Eigen::Vector3d& p) { return sphere_preset_field(p); };
  if (kind == "rotation") {
    const Vec axis = parse_vector(require(d, "axis"), "drift.axis");
    if (axis.size() != 3) throw ConfigError("'drift.axis' must have 3 entries");
    const Eigen::Vector3d w = axis;
    return [w](double, const Eigen::Vector3d& p) { return Eigen::Vector3d(w.cross(p)); };
  }
  throw ConfigError("unknown sphere drift kind '" + kind + "'");
}

}  // namespace

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json config;
  try {
    config = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
  validate_config(config);
  return config;
}

void validate_config(const json& config) {
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  check(config, schema(), "");
  text(require(config, "preset"), "preset");
}

void apply_overrides(json& config, const Overrides& o) {
  if (o.steps) config["steps"] = *o.steps;
  if (o.tol) config["solver"]["tol"] = *o.tol;
  if (o.seed) config["seed"] = *o.seed;
  if (o.out) config["output"] = *o.out;
}

Vec parse_vector(const json& value, const std::string& what) {
  if (!value.is_array()) throw ConfigError("'" + what + "' must be an array of numbers");
  Vec v(static_cast<int>(value.size()));
  for (std::size_t i = 0; i < value.size(); ++i) v[static_cast<int>(i)] = number(value[i], what);
  return v;
}

Mat parse_matrix(const json& value, const std::string& what) {
  if (!value.is_array()) throw ConfigError("'" + what + "' must be an array");
  if (value.empty()) return Mat(0, 0);
  if (!value.front().is_array()) return parse_vector(value, what).asDiagonal();
  const int rows = static_cast<int>(value.size());
  const int cols = static_cast<int>(value.front().size());
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const Vec r = parse_vector(value[i], what);
    if (r.size() != cols) throw ConfigError("'" + what + "' has ragged rows");
    m.row(i) = r.transpose();
  }
  return m;
}

CovarianceSchedule parse_sigma(const json& config, int rank) {
  if (!config.contains("sigma")) return CovarianceSchedule::constant(Mat::Identity(rank, rank));
  const json& s = config.at("sigma");
  CovarianceSchedule out;
  if (s.is_object()) {
    std::vector<double> times;
    for (const json& t : require(s, "times")) times.push_back(number(t, "sigma.times"));
    std::vector<Mat> samples;
    for (const json& m : require(s, "samples")) samples.push_back(parse_matrix(m, "sigma.samples"));
    out = CovarianceSchedule::piecewise_linear(std::move(times), std::move(samples));
  } else {
    out = CovarianceSchedule::constant(parse_matrix(s, "sigma"));
  }
  if (out.rank() != rank) throw ConfigError("sigma must be " + std::to_string(rank) + " × " + std::to_string(rank));
  try {
    out.validate();
  } catch (const InvalidModel& e) {
    throw ConfigError(std::string("sigma: ") + e.what());
  }
  return out;
}

ManifoldModel parse_manifold(const json& config) {
  const json& m = require(config, "manifold");
  const std::string kind = kind_of(m, "manifold");
  const std::optional<Vec> origin =
      m.contains("origin") ? std::optional<Vec>(parse_vector(m.at("origin"), "manifold.origin")) : std::nullopt;
  auto check_origin = [&](int dim) {
    if (origin && origin->size() != dim)
      throw ConfigError("manifold.origin must have " + std::to_string(dim) + " entries");
  };
  if (kind == "flat") {
    const int dim = m.contains("dim") ? integer(m.at("dim"), "manifold.dim") : (origin ? int(origin->size()) : 2);
    if (dim < 1) throw ConfigError("manifold.dim must be positive");
    check_origin(dim);
    return flat_model(dim, origin ? *origin : Vec::Zero(dim));
  }
  if (kind == "sphere") {
    check_origin(2);
    return sphere_model(origin ? *origin : Vec(Vec::Zero(2)));
  }
  if (kind == "heisenberg") {
    check_origin(3);
    return heisenberg_model(origin ? *origin : Vec(Vec::Zero(3)));
  }
  if (kind == "so3-chart") {
    if (origin) throw ConfigError("so3-chart has a fixed origin");
    return so3_chart_model();
  }
  throw ConfigError("unknown manifold kind '" + kind + "'");
}

DriftModel parse_chart_drift(const json& config, const ManifoldModel& model) {
  const int d = model.dim;
  if (!config.contains("drift")) return DriftModel::zero(d);
  const json& s = config.at("drift");
  const std::string kind = kind_of(s, "drift");
  if (kind == "zero") return DriftModel::zero(d);
  if (kind == "constant") {
    const Vec v = parse_vector(require(s, "value"), "drift.value");
    if (v.size() != d) throw ConfigError("drift.value has the wrong dimension");
    return DriftModel::constant(v);
  }
  if (kind == "affine") {
    const Mat a = parse_matrix(require(s, "A"), "drift.A");
    const Vec b = s.contains("b") ? parse_vector(s.at("b"), "drift.b") : Vec(Vec::Zero(d));
    if (a.rows() != d || a.cols() != d || b.size() != d) throw ConfigError("drift.A/b have the wrong dimension");
    return DriftModel::affine(a, b);
  }
  if ((kind == "sphere-preset" || kind == "rotation") && model.name.find("sphere") != std::string::npos) {
    const auto field = ambient_sphere_field(config);
    return DriftModel::from_value([field](double t, const Vec& x) {
      const Eigen::Vector3d p = sphere_from_chart(x);
      Eigen::Vector3d f = field(t, p);
      f -= f.dot(p) * p;
      const Eigen::Matrix<double, 3, 2> dp = sphere_chart_differential(x);
      return Vec(dp.colPivHouseholderQr().solve(f));
    });
  }
  throw ConfigError("drift kind '" + kind + "' is not available for this manifold");
}

LieGroupModel parse_group(const json& config) {
  const json& g = require(config, "group");
  const std::string kind = kind_of(g, "group");
  LieConvention conv = LieConvention::Right;
  if (g.contains("convention")) {
    const std::string c = text(g.at("convention"), "group.convention");
    if (c == "left")
      conv = LieConvention::Left;
    else if (c != "right")
      throw ConfigError("group.convention must be 'left' or 'right'");
  }
  int dim = 0, rank = 0;
  if (kind == "so3") {
    dim = 3;
    rank = 3;
  } else if (kind == "heisenberg") {
    dim = 3;
    rank = 2;
  } else {
    throw ConfigError("unknown group kind '" + kind + "'");
  }
  Vec drift = Vec::Zero(dim);
  if (config.contains("drift")) {
    const json& s = config.at("drift");
    const std::string dk = kind_of(s, "drift");
    if (dk == "constant") {
      drift = parse_vector(require(s, "value"), "drift.value");
      if (drift.size() != dim) throw ConfigError("drift.value must have " + std::to_string(dim) + " entries");
    } else if (dk != "zero") {
      throw ConfigError("group drift must be 'zero' or 'constant'");
    }
  }
  const Mat sigma = parse_sigma(config, rank).at(0.0);
  if (config.contains("sigma") && config.at("sigma").is_object())
    throw ConfigError("group models take a constant sigma");
  return kind == "so3" ? so3_model(sigma, drift, conv) : heisenberg_group_model(sigma, drift, conv);
}

HomogeneousModel parse_sphere(const json& config) {
  const Mat sigma = parse_sigma(config, 2).at(0.0);
  if (config.contains("sigma") && config.at("sigma").is_object())
    throw ConfigError("the sphere model takes a constant sigma");
  return sphere_homogeneous_model(sigma, ambient_sphere_field(config));
}

LandmarkSystem parse_landmarks(const json& config) {
  const json& l = require(config, "landmarks");
  LandmarkSystem s;
  s.initial = points(require(l, "initial"), "landmarks.initial");
  if (s.initial.rows() < 1) throw ConfigError("landmarks.initial is empty");
  const int d = static_cast<int>(s.initial.cols());
  if (l.contains("fields")) {
    const json& f = l.at("fields");
    if (f.is_object()) {
      const json& g = require(f, "grid");
      s.fields = grid_fields(s.initial, integer(require(g, "per_axis"), "grid.per_axis"),
                             g.contains("width") ? number(g.at("width"), "grid.width") : 0.5,
                             g.contains("inflate") ? number(g.at("inflate"), "grid.inflate") : 0.25);
    } else {
      for (const json& e : f) {
        const std::string kind = kind_of(e, "landmarks.fields");
        if (kind == "gaussian") {
          s.fields.push_back(gaussian_field(parse_vector(require(e, "center"), "field.center"),
                                            number(require(e, "width"), "field.width"),
                                            integer(require(e, "direction"), "field.direction")));
        } else if (kind == "constant") {
          s.fields.push_back(constant_field(parse_vector(require(e, "value"), "field.value")));
        } else if (kind == "linear") {
          s.fields.push_back(linear_field(parse_matrix(require(e, "A"), "field.A"),
                                          e.contains("b") ? parse_vector(e.at("b"), "field.b") : Vec(Vec::Zero(d))));
        } else {
          throw ConfigError("unknown field kind '" + kind + "'");
        }
      }
    }
  }
  ManifoldModel plane = flat_model(d);
  s.drift = parse_chart_drift(config, plane);
  s.horizon = config_horizon(config);
  s.steps = config_steps(config, 200);
  try {
    s.validate();
  } catch (const InvalidModel& e) {
    throw ConfigError(std::string("landmarks: ") + e.what());
  }
  return s;
}

Mat parse_landmark_targets(const json& config, const LandmarkSystem& system) {
  const Mat t = points(require(require(config, "landmarks"), "targets"), "landmarks.targets");
  if (t.rows() != system.n() || t.cols() != system.d()) throw ConfigError("landmarks.targets must match landmarks.initial");
  return t;
}

ShootingConfig parse_solver(const json& config) {
  ShootingConfig c;
  if (config.contains("seed")) c.seed = config.at("seed").get<std::uint64_t>();
  if (!config.contains("solver")) return c;
  const json& s = config.at("solver");
  if (s.contains("tol")) c.tol = number(s.at("tol"), "solver.tol");
  if (s.contains("max_iter")) c.max_iter = integer(s.at("max_iter"), "solver.max_iter");
  if (s.contains("fd_step")) c.fd_step = number(s.at("fd_step"), "solver.fd_step");
  if (s.contains("backtrack")) c.backtrack = number(s.at("backtrack"), "solver.backtrack");
  if (s.contains("min_step")) c.min_step = number(s.at("min_step"), "solver.min_step");
  if (s.contains("max_condition")) c.max_condition = number(s.at("max_condition"), "solver.max_condition");
  if (s.contains("restarts")) {
    c.restarts.clear();
    for (const json& r : s.at("restarts")) c.restarts.push_back(number(r, "solver.restarts"));
  }
  if (!(c.tol > 0.0) || c.max_iter < 1 || !(c.fd_step > 0.0)) throw ConfigError("solver settings must be positive");
  return c;
}

SimConfig parse_simulation(const json& config) {
  SimConfig c;
  c.steps = config_steps(config, 1000);
  if (config.contains("seed")) c.seed = config.at("seed").get<std::uint64_t>();
  if (config.contains("simulation")) {
    const json& s = config.at("simulation");
    if (s.contains("paths")) c.paths = integer(s.at("paths"), "simulation.paths");
    if (s.contains("record_endpoints_only")) c.record_endpoints_only = s.at("record_endpoints_only").get<bool>();
    if (s.contains("noise_scale")) c.noise_scale = number(s.at("noise_scale"), "simulation.noise_scale");
  }
  try {
    c.validate();
  } catch (const InvalidModel& e) {
    throw ConfigError(std::string("simulation: ") + e.what());
  }
  return c;
}

double config_horizon(const json& config) {
  const double t = config.contains("horizon") ? number(config.at("horizon"), "horizon") : 1.0;
  if (!(t > 0.0)) throw ConfigError("horizon must be positive");
  return t;
}

int config_steps(const json& config, int fallback) {
  const int n = config.contains("steps") ? integer(config.at("steps"), "steps") : fallback;
  if (n < 1) throw ConfigError("steps must be positive");
  return n;
}

}  // namespace mppgeo::cli
