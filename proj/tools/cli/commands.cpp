#include "cli.hpp"

#include "mppgeo/manifolds.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <set>

namespace mppgeo::cli {

namespace {

struct Output {
  std::optional<json> traj;
  std::optional<json> samples;
  std::vector<std::string> csv_header;
  std::vector<std::vector<double>> csv_rows;
  double residual = 0.0;
  double energy = 0.0;
  int iterations = 0;
  std::string extra;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

json number_or_inf(double v) { return std::isfinite(v) ? json(v) : json(v > 0 ? "inf" : "-inf"); }

json header(const json& config, const std::string& command) {
  return {{"preset", config.at("preset")}, {"command", command}, {"version", kVersion}, {"config", config}};
}

json shooting_json(const ShootingResult& s) {
  return {{"residual", s.residual_norm},
          {"iterations", s.iterations},
          {"converged", s.converged},
          {"condition", s.condition},
          {"history", s.history},
          {"starts_used", s.starts_used}};
}

void append(std::vector<double>& row, const Mat& m) {
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
}

void append(std::vector<double>& row, const Vec& v) {
  for (int i = 0; i < v.size(); ++i) row.push_back(v[i]);
}

std::vector<std::string> columns(const std::string& name, int rows, int cols) {
  std::vector<std::string> out;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      out.push_back(cols == 1 ? name + "_" + std::to_string(i) : name + "_" + std::to_string(i) + "_" + std::to_string(j));
  return out;
}

void extend(std::vector<std::string>& a, const std::vector<std::string>& b) { a.insert(a.end(), b.begin(), b.end()); }

Vec momentum(const json& config, int size) {
  if (!config.contains("initial_momentum")) return Vec::Zero(size);
  const Vec v = parse_vector(config.at("initial_momentum"), "initial_momentum");
  if (v.size() != size) throw ConfigError("initial_momentum must have " + std::to_string(size) + " entries");
  return v;
}

// ---- Lie groups ---------------------------------------------------------

void lie_output(Output& o, const json& config, const std::string& command, const LieTrajectory& tr) {
  json gamma = json::array(), alpha = json::array(), z = json::array();
  const int n = static_cast<int>(tr.states.front().gamma.rows());
  const int d = static_cast<int>(tr.states.front().alpha.size());
  o.csv_header = {"t"};
  extend(o.csv_header, columns("gamma", n, n));
  extend(o.csv_header, columns("alpha", d, 1));
  o.csv_header.push_back("energy");
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    gamma.push_back(matrix_json(tr.states[i].gamma));
    alpha.push_back(vector_json(tr.states[i].alpha));
    z.push_back(vector_json(tr.z[i]));
    std::vector<double> row{tr.times[i]};
    append(row, tr.states[i].gamma);
    append(row, tr.states[i].alpha);
    row.push_back(tr.energy[i]);
    o.csv_rows.push_back(std::move(row));
  }
  o.traj = json{{"header", header(config, command)},
                {"t", tr.times},
                {"states", {{"group", {{"gamma", gamma}, {"alpha", alpha}, {"z", z}}}}},
                {"diagnostics",
                 {{"energy", tr.energy},
                  {"conserved", tr.quadratic},
                  {"orthogonality_defect", tr.max_orthogonality_defect}}}};
  o.energy = tr.total_energy();
}

Output so3_ivp(const json& config) {
  const LieGroupModel m = parse_group(config);
  const LieTrajectory tr = integrate_group(m, momentum(config, m.dim), config_horizon(config), config_steps(config, 1000));
  Output o;
  lie_output(o, config, "so3-ivp", tr);
  o.extra = "orthogonality_drift=" + fmt("%.3e", tr.max_orthogonality_defect);
  return o;
}

Output so3_bvp(const json& config) {
  const LieGroupModel m = parse_group(config);
  const double horizon = config_horizon(config);
  const int steps = config_steps(config, 1000);
  const json& t = config.contains("target") ? config.at("target") : throw ConfigError("missing 'target'");
  Mat target;
  std::optional<Vec> generator;
  if (t.contains("from_momentum")) {
    generator = parse_vector(t.at("from_momentum"), "target.from_momentum");
    if (generator->size() != m.dim) throw ConfigError("target.from_momentum has the wrong size");
    target = integrate_group(m, *generator, horizon, steps).final_state().gamma;
  } else if (t.contains("rotation_vector")) {
    if (m.name.rfind("so3", 0) != 0) throw ConfigError("rotation_vector targets need the so3 group");
    const Vec w = parse_vector(t.at("rotation_vector"), "target.rotation_vector");
    if (w.size() != 3) throw ConfigError("target.rotation_vector must have 3 entries");
    target = so3_exp(w);
  } else if (t.contains("matrix")) {
    target = parse_matrix(t.at("matrix"), "target.matrix");
    if (target.rows() != m.identity().rows() || target.cols() != m.identity().cols())
      throw ConfigError("target.matrix has the wrong shape");
  } else {
    throw ConfigError("target needs from_momentum, rotation_vector or matrix");
  }
  std::optional<Vec> guess;
  if (config.contains("initial_momentum")) guess = momentum(config, m.dim);
  const LieBoundaryResult r = lie_shoot(m, target, horizon, steps, parse_solver(config), guess ? &*guess : nullptr);
  Output o;
  lie_output(o, config, "so3-bvp", r.trajectory);
  json& diag = (*o.traj)["diagnostics"];
  diag["shooting"] = shooting_json(r.shooting);
  diag["residual"] = r.shooting.residual_norm;
  diag["alpha0"] = vector_json(r.alpha0);
  diag["target"] = matrix_json(target);
  o.residual = r.shooting.residual_norm;
  o.iterations = r.shooting.iterations;
  o.extra = "orthogonality_drift=" + fmt("%.3e", r.trajectory.max_orthogonality_defect);
  if (generator) {
    const double err = (r.alpha0 - *generator).norm();
    diag["alpha0_recovery_error"] = err;
    o.extra += " alpha0_error=" + fmt("%.3e", err);
  }
  return o;
}

// ---- sphere ---------------------------------------------------------------

Output sphere_bvp(const json& config) {
  const HomogeneousModel m = parse_sphere(config);
  const double horizon = config_horizon(config);
  const int steps = config_steps(config, 1000);
  const json& t = config.contains("target") ? config.at("target") : throw ConfigError("missing 'target'");
  Vec target;
  if (t.contains("chart")) {
    target = parse_vector(t.at("chart"), "target.chart");
    if (target.size() != 2) throw ConfigError("target.chart must have 2 entries");
  } else if (t.contains("ambient")) {
    const Vec p = parse_vector(t.at("ambient"), "target.ambient");
    if (p.size() != 3 || p.norm() == 0.0) throw ConfigError("target.ambient must be a nonzero 3-vector");
    target = m.chart(p.normalized());
  } else {
    throw ConfigError("target needs chart or ambient");
  }
  std::optional<Vec> guess;
  if (config.contains("initial_momentum")) guess = momentum(config, 2);
  const HomogeneousBoundaryResult r = sphere_shoot(m, target, horizon, steps, parse_solver(config), guess ? &*guess : nullptr);
  const LieTrajectory& tr = r.trajectory.lifted;

  Output o;
  json chart = json::array(), ambient = json::array(), gamma = json::array(), alpha = json::array();
  o.csv_header = {"t", "chart_0", "chart_1", "ambient_0", "ambient_1", "ambient_2", "alpha_0", "alpha_1", "alpha_2",
                  "energy"};
  double pi_related = 0.0;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    chart.push_back(vector_json(r.trajectory.base_chart[i]));
    ambient.push_back(vector_json(r.trajectory.base_ambient[i]));
    gamma.push_back(matrix_json(tr.states[i].gamma));
    alpha.push_back(vector_json(tr.states[i].alpha));
    pi_related = std::max(pi_related, pi_relatedness_residual(m, tr.times[i], tr.states[i].gamma));
    std::vector<double> row{tr.times[i]};
    append(row, r.trajectory.base_chart[i]);
    append(row, r.trajectory.base_ambient[i]);
    append(row, tr.states[i].alpha);
    row.push_back(tr.energy[i]);
    o.csv_rows.push_back(std::move(row));
  }
  json quiver = json::array();
  if (m.base_drift) {
    for (int i = 1; i < 8; ++i) {
      for (int j = 0; j < 16; ++j) {
        const double th = M_PI * i / 8.0, ph = 2.0 * M_PI * j / 16.0;
        const Vec p = Eigen::Vector3d(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
        quiver.push_back({{"point", vector_json(p)}, {"vector", vector_json(m.base_drift(0.0, p))}});
      }
    }
  }
  o.traj = json{{"header", header(config, "sphere-bvp")},
                {"t", tr.times},
                {"states", {{"sphere", {{"chart", chart}, {"ambient", ambient}, {"gamma", gamma}, {"alpha", alpha}}}}},
                {"diagnostics",
                 {{"energy", tr.energy},
                  {"conserved", tr.quadratic},
                  {"residual", r.shooting.residual_norm},
                  {"shooting", shooting_json(r.shooting)},
                  {"alpha0", vector_json(r.alpha0_p)},
                  {"target_chart", vector_json(target)},
                  {"pi_relatedness", pi_related},
                  {"quiver", quiver}}}};
  o.residual = r.shooting.residual_norm;
  o.energy = tr.total_energy();
  o.iterations = r.shooting.iterations;
  o.extra = "pi_relatedness=" + fmt("%.3e", pi_related);
  return o;
}

// ---- landmarks ------------------------------------------------------------

json field_centers(const LandmarkSystem& s) {
  std::set<std::vector<double>> seen;
  json out = json::array();
  for (const NoiseField& f : s.fields) {
    if (f.kind != FieldKind::Gaussian) continue;
    std::vector<double> c(f.center.data(), f.center.data() + f.center.size());
    if (seen.insert(c).second) out.push_back(c);
  }
  return out;
}

void landmark_states(Output& o, const LandmarkTrajectory& tr, json& x, json& lam, json& c) {
  const LandmarkState& s0 = tr.states.front();
  o.csv_header = {"t"};
  extend(o.csv_header, columns("x", static_cast<int>(s0.x.rows()), static_cast<int>(s0.x.cols())));
  extend(o.csv_header, columns("lam", static_cast<int>(s0.x.rows()), static_cast<int>(s0.x.cols())));
  o.csv_header.push_back("energy");
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    x.push_back(matrix_json(tr.states[i].x));
    lam.push_back(matrix_json(tr.states[i].lam));
    c.push_back(vector_json(tr.states[i].c));
    std::vector<double> row{tr.times[i]};
    append(row, tr.states[i].x);
    append(row, tr.states[i].lam);
    row.push_back(tr.energy[i]);
    o.csv_rows.push_back(std::move(row));
  }
}

Output landmarks_bvp(const json& config) {
  const LandmarkSystem s = parse_landmarks(config);
  const Mat targets = parse_landmark_targets(config, s);
  std::optional<Mat> guess;
  const json& l = config.at("landmarks");
  if (l.contains("guess")) {
    guess = parse_matrix(l.at("guess"), "landmarks.guess");
    if (guess->rows() != s.n() || guess->cols() != s.d()) throw ConfigError("landmarks.guess must be n × d");
  }
  const LandmarkBoundaryResult r = landmark_shoot(s, targets, guess ? &*guess : nullptr, parse_solver(config));
  const LandmarkTrajectory drift_only = landmark_integrate(s, Mat::Zero(s.n(), s.d()));

  Output o;
  json x = json::array(), lam = json::array(), c = json::array(), blue = json::array();
  landmark_states(o, r.trajectory, x, lam, c);
  for (const LandmarkState& st : drift_only.states) blue.push_back(matrix_json(st.x));
  o.traj = json{{"header", header(config, "landmarks-bvp")},
                {"t", r.trajectory.times},
                {"states", {{"landmarks", {{"x", x}, {"lam", lam}, {"c", c}, {"drift_only", blue}}}}},
                {"scene",
                 {{"initial", matrix_json(s.initial)},
                  {"targets", matrix_json(targets)},
                  {"field_centers", field_centers(s)},
                  {"field_count", s.rank()}}},
                {"diagnostics",
                 {{"energy", r.trajectory.energy},
                  {"conserved", r.trajectory.hamiltonian},
                  {"residual", r.shooting.residual_norm},
                  {"shooting", shooting_json(r.shooting)},
                  {"lam0", matrix_json(r.lam0)}}}};
  o.residual = r.shooting.residual_norm;
  o.energy = r.trajectory.total_energy();
  o.iterations = r.shooting.iterations;
  o.extra = "landmarks=" + std::to_string(s.n()) + " fields=" + std::to_string(s.rank());
  return o;
}

// ---- general engine -------------------------------------------------------

MPPProblem engine_problem(const json& config) {
  MPPProblem p;
  p.model = parse_manifold(config);
  p.drift = parse_chart_drift(config, p.model);
  p.sigma = parse_sigma(config, p.model.sr_rank);
  p.horizon = config_horizon(config);
  p.steps = config_steps(config, 1000);
  return p;
}

Vec chi_from(const json& config, int rank) {
  const int k = rank * (rank - 1) / 2;
  if (!config.contains("chi0")) return Vec::Zero(k);
  const Vec v = parse_vector(config.at("chi0"), "chi0");
  if (v.size() != k) throw ConfigError("chi0 must have " + std::to_string(k) + " entries");
  return v;
}

void engine_output(Output& o, const json& config, const std::string& command, const Trajectory& tr) {
  const MPPState& s0 = tr.states.front();
  const int d = static_cast<int>(s0.x.size());
  o.csv_header = {"t"};
  extend(o.csv_header, columns("x", d, 1));
  extend(o.csv_header, columns("lam", static_cast<int>(s0.lam.size()), 1));
  extend(o.csv_header, columns("chi", static_cast<int>(s0.chi.size()), 1));
  o.csv_header.push_back("energy");
  json x = json::array(), lam = json::array(), chi = json::array(), frame = json::array();
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const MPPState& s = tr.states[i];
    x.push_back(vector_json(s.x));
    lam.push_back(vector_json(s.lam));
    chi.push_back(vector_json(s.chi));
    frame.push_back(matrix_json(s.frame));
    std::vector<double> row{tr.times[i]};
    append(row, s.x);
    append(row, s.lam);
    append(row, s.chi);
    row.push_back(tr.energy[i]);
    o.csv_rows.push_back(std::move(row));
  }
  o.traj = json{{"header", header(config, command)},
                {"t", tr.times},
                {"states", {{"mpp", {{"x", x}, {"lam", lam}, {"chi", chi}, {"frame", frame}}}}},
                {"diagnostics",
                 {{"energy", tr.energy},
                  {"conserved", tr.hamiltonian},
                  {"constraint_violation", tr.max_constraint_violation}}}};
  o.energy = tr.total_energy();
}

Output mpp_forward(const json& config) {
  const MPPProblem p = engine_problem(config);
  const int jr = p.model.sr_rank;
  const Trajectory tr = integrate_forward(p, momentum(config, p.model.dim), chi_from(config, jr));
  Output o;
  engine_output(o, config, "mpp-forward", tr);
  double drift = 0.0;
  for (double h : tr.hamiltonian) drift = std::max(drift, std::abs(h - tr.hamiltonian.front()));
  o.extra = "hamiltonian_drift=" + fmt("%.3e", drift);
  return o;
}

// ---- sampler --------------------------------------------------------------

Output simulate(const json& config) {
  const MPPProblem p = engine_problem(config);
  const SimConfig sim = parse_simulation(config);
  const SampleSet s = sample_development(p, sim);
  Output o;
  json endpoints = json::array(), paths = json::array();
  const int d = p.model.dim;
  o.csv_header = {"path"};
  extend(o.csv_header, columns("x", d, 1));
  for (std::size_t i = 0; i < s.endpoints.size(); ++i) {
    endpoints.push_back(vector_json(s.endpoints[i]));
    std::vector<double> row{static_cast<double>(s.path_index[i])};
    append(row, s.endpoints[i]);
    o.csv_rows.push_back(std::move(row));
  }
  for (const std::vector<Vec>& path : s.paths) {
    json pj = json::array();
    for (const Vec& x : path) pj.push_back(vector_json(x));
    paths.push_back(std::move(pj));
  }
  json samples{{"header", header(config, "simulate")},
               {"endpoints", endpoints},
               {"path_index", s.path_index},
               {"discarded", s.discarded},
               {"mean", s.endpoints.empty() ? json::array() : vector_json(s.mean())},
               {"covariance", s.endpoints.size() < 2 ? json::array() : matrix_json(s.covariance())}};
  if (!sim.record_endpoints_only) {
    samples["t"] = s.times;
    samples["paths"] = paths;
  }
  o.samples = std::move(samples);
  o.extra = "kept=" + std::to_string(s.endpoints.size()) + " discarded=" + std::to_string(s.discarded);
  return o;
}

// ---- singularity ----------------------------------------------------------

json certificate_json(const SingularityCertificate& c, const std::string& subject) {
  return {{"subject", subject},
          {"min_singular_value", number_or_inf(c.min_singular_value)},
          {"scale", c.scale},
          {"threshold", kSingularTol * c.scale},
          {"is_singular", c.is_singular}};
}

Output singular_check(const json& config) {
  Output o;
  SingularityCertificate cert;
  std::string subject;
  if (config.contains("landmarks")) {
    subject = "landmarks";
    const LandmarkSystem s = parse_landmarks(config);
    Mat lam0 = Mat::Zero(s.n(), s.d());
    if (config.contains("initial_momentum")) {
      lam0 = parse_matrix(config.at("initial_momentum"), "initial_momentum");
      if (lam0.rows() != s.n() || lam0.cols() != s.d()) throw ConfigError("initial_momentum must be n × d");
    }
    const LandmarkTrajectory tr = landmark_integrate(s, lam0);
    cert = landmark_singular_check(s, tr);
    json x = json::array(), lam = json::array(), c = json::array();
    landmark_states(o, tr, x, lam, c);
    o.traj = json{{"header", header(config, "singular-check")},
                  {"t", tr.times},
                  {"states", {{"landmarks", {{"x", x}, {"lam", lam}, {"c", c}}}}},
                  {"diagnostics", {{"energy", tr.energy}, {"conserved", tr.hamiltonian}}}};
    o.energy = tr.total_energy();
  } else if (config.contains("group")) {
    subject = "group";
    const LieGroupModel m = parse_group(config);
    const LieTrajectory tr = integrate_group(m, momentum(config, m.dim), config_horizon(config), config_steps(config, 1000));
    cert = lie_singular_check(m, tr);
    lie_output(o, config, "singular-check", tr);
  } else {
    subject = "manifold";
    const MPPProblem p = engine_problem(config);
    const int jr = p.model.sr_rank;
    const Trajectory tr = integrate_forward(p, momentum(config, p.model.dim), chi_from(config, jr));
    cert = singularity_certificate(p.model, p.drift, tr.path(), p.transport);
    engine_output(o, config, "singular-check", tr);
  }
  (*o.traj)["diagnostics"]["certificate"] = certificate_json(cert, subject);
  o.extra = std::string("is_singular=") + (cert.is_singular ? "true" : "false") +
            " min_singular_value=" + fmt("%.3e", cert.min_singular_value) + " scale=" + fmt("%.3e", cert.scale);
  return o;
}

const std::map<std::string, std::pair<std::string, std::function<Output(const json&)>>>& commands() {
  static const std::map<std::string, std::pair<std::string, std::function<Output(const json&)>>> table{
      {"so3-ivp", {"Forward most probable path on a matrix Lie group", so3_ivp}},
      {"so3-bvp", {"Boundary value problem on a matrix Lie group", so3_bvp}},
      {"sphere-bvp", {"Boundary value problem on S2 via its lift to SO(3)", sphere_bvp}},
      {"landmarks-bvp", {"Landmark boundary value problem", landmarks_bvp}},
      {"simulate", {"Sample the developed diffusion", simulate}},
      {"mpp-forward", {"Forward most probable path on a chart manifold", mpp_forward}},
      {"singular-check", {"Singularity certificate of a forward path", singular_check}},
  };
  return table;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Most probable paths of manifold-valued diffusions", "mppgeo"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  std::string config_path;
  int steps = 0;
  double tol = 0.0;
  std::uint64_t seed = 0;
  std::string out_path;
  std::map<std::string, CLI::App*> subs;
  std::map<std::string, std::array<CLI::Option*, 4>> opts;
  for (const auto& [name, entry] : commands()) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", config_path, "Experiment config (JSON)")->required();
    opts[name] = {sub->add_option("--steps", steps, "Override the step count"),
                  sub->add_option("--tol", tol, "Override the solver tolerance"),
                  sub->add_option("--seed", seed, "Override the seed"),
                  sub->add_option("--out", out_path, "Override the output prefix")};
    subs[name] = sub;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  std::string name;
  for (const auto& [n, sub] : subs)
    if (sub->parsed()) name = n;
  const auto& o4 = opts.at(name);
  Overrides ov;
  if (*o4[0]) ov.steps = steps;
  if (*o4[1]) ov.tol = tol;
  if (*o4[2]) ov.seed = seed;
  if (*o4[3]) ov.out = out_path;

  const auto start = std::chrono::steady_clock::now();
  try {
    json config = load_config(config_path);
    apply_overrides(config, ov);
    validate_config(config);
    const std::string preset = config.at("preset").get<std::string>();
    const std::string prefix =
        config.contains("output") ? config.at("output").get<std::string>() : "out/" + preset;
    const Output result = commands().at(name).second(config);
    if (result.traj) write_json(prefix + ".traj.json", *result.traj);
    if (result.samples) write_json(prefix + ".samples.json", *result.samples);
    if (!result.csv_header.empty()) write_csv(prefix + ".csv", result.csv_header, result.csv_rows);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out << name << ' ' << preset << ": residual=" << fmt("%.3e", result.residual)
        << " energy=" << fmt("%.10g", result.energy) << " iterations=" << result.iterations
        << " time=" << fmt("%.3f", wall) << 's';
    if (!result.extra.empty()) out << ' ' << result.extra;
    out << '\n';
    return 0;
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return 1;
  } catch (const InvalidModel& e) {
    err << e.what() << '\n';
    return 1;
  } catch (const json::exception& e) {
    err << e.what() << '\n';
    return 1;
  } catch (const NonConvergence& e) {
    err << e.what() << "\n";
    return 2;
  } catch (const MppError& e) {
    err << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace mppgeo::cli
