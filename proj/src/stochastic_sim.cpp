#include "mppgeo/stochastic_sim.hpp"

#include "mppgeo/parallel.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

namespace mppgeo {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

double to_uniform(std::uint32_t lo, std::uint32_t hi) {
  const std::uint64_t u = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return (static_cast<double>(u >> 11) + 0.5) * 0x1.0p-53;
}

struct Heun {
  Vec dx;
  Mat df;
};

}  // namespace

PhiloxCounter philox4x32(PhiloxCounter c, PhiloxKey k) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kW0;
      k[1] += kW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

std::vector<double> philox_normals(std::uint64_t seed, std::uint64_t path, std::uint64_t step, int count) {
  std::vector<double> out;
  out.reserve(count + 1);
  const PhiloxKey key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (std::uint32_t b = 0; static_cast<int>(out.size()) < count; ++b) {
    const PhiloxCounter w = philox4x32({b, static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(path),
                                        static_cast<std::uint32_t>(path >> 32)},
                                       key);
    const double u = to_uniform(w[0], w[1]);
    const double v = to_uniform(w[2], w[3]);
    const double r = std::sqrt(-2.0 * std::log(u));
    out.push_back(r * std::cos(2.0 * std::numbers::pi * v));
    out.push_back(r * std::sin(2.0 * std::numbers::pi * v));
  }
  out.resize(count);
  return out;
}

void SimConfig::validate() const {
  if (paths < 1) throw InvalidModel("need at least one path");
  if (steps < 1) throw InvalidModel("need at least one step");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) throw InvalidModel("noise scale must be finite and ≥ 0");
}

Vec SampleSet::mean() const {
  if (endpoints.empty()) return Vec();
  Vec m = Vec::Zero(endpoints.front().size());
  for (const Vec& e : endpoints) m += e;
  return m / static_cast<double>(endpoints.size());
}

Mat SampleSet::covariance() const {
  if (endpoints.size() < 2) return Mat();
  const Vec m = mean();
  Mat c = Mat::Zero(m.size(), m.size());
  for (const Vec& e : endpoints) c += (e - m) * (e - m).transpose();
  return c / static_cast<double>(endpoints.size() - 1);
}

SampleSet sample_development(const MPPProblem& problem, const SimConfig& config) {
  problem.validate();
  config.validate();
  const ManifoldModel& model = problem.model;
  const int jr = model.sr_rank;
  const int steps = config.steps;
  const double h = problem.horizon / steps;
  const double amp = std::sqrt(config.noise_scale);
  const Mat f0 = model.orthonormal_frame0();
  const std::vector<double> times = uniform_grid(problem.horizon, steps);

  std::vector<Mat> root(steps + 1);
  for (int i = 0; i <= steps; ++i) root[i] = amp * problem.sigma.sqrt_at(times[i]);

  // Increments of (x, frame) over one step for a fixed Brownian increment.
  const auto increment = [&](double t, const Mat& s, const Vec& x, const Mat& f, const Vec& db) {
    Heun out;
    out.dx = h * problem.drift.value(t, x) + f.leftCols(jr) * (s * db);
    out.df = frame_derivative(model.christoffel(x), out.dx, f);
    return out;
  };

  std::vector<std::optional<std::vector<Vec>>> results(config.paths);
  parallel_for(config.paths, [&](int p) {
    Vec x = model.origin;
    Mat f = f0;
    std::vector<Vec> trace;
    trace.reserve(config.record_endpoints_only ? 1 : steps + 1);
    if (!config.record_endpoints_only) trace.push_back(x);
    const double sqrt_h = std::sqrt(h);
    for (int i = 0; i < steps; ++i) {
      const std::vector<double> z = philox_normals(config.seed, p, i, jr);
      const Vec db = sqrt_h * Eigen::Map<const Vec>(z.data(), jr);
      const Heun a = increment(times[i], root[i], x, f, db);
      const Vec xp = x + a.dx;
      if (!model.in_domain(xp)) return;
      const Heun b = increment(times[i + 1], root[i + 1], xp, f + a.df, db);
      x += 0.5 * (a.dx + b.dx);
      f += 0.5 * (a.df + b.df);
      if (!x.allFinite() || !f.allFinite())
        throw NonFiniteState("sample path " + std::to_string(p) + " is not finite at step " + std::to_string(i + 1));
      if (!model.in_domain(x)) return;
      if (!config.record_endpoints_only) trace.push_back(x);
    }
    if (config.record_endpoints_only) trace.push_back(x);
    results[p] = std::move(trace);
  });

  SampleSet out;
  out.times = times;
  for (int p = 0; p < config.paths; ++p) {
    if (!results[p]) {
      ++out.discarded;
      continue;
    }
    out.endpoints.push_back(results[p]->back());
    out.path_index.push_back(p);
    if (!config.record_endpoints_only) out.paths.push_back(std::move(*results[p]));
  }
  return out;
}

}  // namespace mppgeo
