#include "mppgeo/bvp_shooting.hpp"

#include "mppgeo/errors.hpp"
#include "mppgeo/parallel.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace mppgeo {

namespace {

double pow2_floor(double h) {
  int e = 0;
  std::frexp(h, &e);
  return std::ldexp(1.0, e - 1);
}

Vec scaled(const ShootingProblem& problem, const Vec& r) {
  if (problem.scale.size() == 0) return r;
  return r.cwiseQuotient(problem.scale);
}

bool recoverable(const MppError& e) {
  switch (e.kind()) {
    case ErrorKind::PathLeavesChart:
    case ErrorKind::NonFiniteState:
    case ErrorKind::StepTooCoarse:
    case ErrorKind::FrameDegenerate:
      return true;
    default:
      return false;
  }
}

struct Attempt {
  Vec u;
  Vec r;
  double norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double condition = 0.0;
  std::vector<double> history;
  bool converged = false;
};

Vec evaluate(const ShootingProblem& problem, const Vec& u) {
  Vec r = problem.residual(u);
  if (r.size() != problem.unknown_dim) throw InvalidModel("residual dimension differs from unknown dimension");
  if (!r.allFinite()) throw NonFiniteState("residual is not finite");
  return r;
}

void newton(const ShootingProblem& problem, const ShootingConfig& config, Attempt& at, int& budget) {
  at.r = evaluate(problem, at.u);
  at.norm = scaled(problem, at.r).norm();
  at.history.push_back(at.norm);
  while (at.norm >= config.tol && budget > 0) {
    --budget;
    const Mat jac = jacobian(problem, at.u, config, &at.r);
    Mat jac_s = jac;
    if (problem.scale.size() != 0)
      for (int i = 0; i < jac_s.rows(); ++i) jac_s.row(i) /= problem.scale[i];
    Eigen::JacobiSVD<Mat> svd(jac_s);
    const auto& s = svd.singularValues();
    at.condition = s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
    if (!(at.condition <= config.max_condition)) {
      std::ostringstream msg;
      msg << "shooting Jacobian condition number " << at.condition << " exceeds " << config.max_condition;
      throw SingularJacobian(msg.str());
    }
    const Vec delta = jac_s.partialPivLu().solve(-scaled(problem, at.r));
    ++at.iterations;

    double step = 1.0;
    bool accepted = false;
    while (step >= config.min_step) {
      const Vec trial = at.u + step * delta;
      try {
        const Vec r = evaluate(problem, trial);
        const double n = scaled(problem, r).norm();
        if (n * n <= (1.0 - 2e-4 * step) * at.norm * at.norm) {
          at.u = trial;
          at.r = r;
          at.norm = n;
          accepted = true;
          break;
        }
      } catch (const MppError& e) {
        if (!recoverable(e)) throw;
      }
      step *= config.backtrack;
    }
    if (!accepted) return;
    at.history.push_back(at.norm);
  }
  at.converged = at.norm < config.tol;
}

}  // namespace

Mat jacobian(const ShootingProblem& problem, const Vec& point, const ShootingConfig& config, const Vec* base_residual) {
  const int m = problem.unknown_dim;
  const Vec r0 = base_residual ? *base_residual : evaluate(problem, point);
  Mat jac(r0.size(), m);
  parallel_for(m, [&](int i) {
    const double h = pow2_floor(config.fd_step * std::max(1.0, std::abs(point[i])));
    Vec u = point;
    u[i] += h;
    jac.col(i) = (evaluate(problem, u) - r0) / h;
  });
  return jac;
}

ShootingResult solve(const ShootingProblem& problem, const Vec& guess, const ShootingConfig& config) {
  if (guess.size() != problem.unknown_dim) throw InvalidModel("guess dimension differs from unknown dimension");
  if (!guess.allFinite()) throw NonFiniteState("shooting guess is not finite");
  if (!(config.tol > 0.0) || config.max_iter < 1) throw InvalidModel("invalid shooting configuration");

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double base = std::max(guess.norm(), 1.0);

  Attempt best;
  best.u = guess;
  int budget = config.max_iter;
  int starts = 0;
  const int total = 1 + static_cast<int>(config.restarts.size());
  for (int s = 0; s < total && budget > 0; ++s) {
    Attempt at;
    at.u = guess;
    if (s > 0) {
      Vec dir(guess.size());
      for (int i = 0; i < dir.size(); ++i) dir[i] = normal(rng);
      if (dir.norm() > 0.0) dir.normalize();
      at.u += config.restarts[s - 1] * base * dir;
    }
    ++starts;
    try {
      newton(problem, config, at, budget);
    } catch (const MppError& e) {
      if (!recoverable(e)) throw;
    }
    if (s == 0 || at.norm < best.norm) best = at;
    if (best.converged) break;
  }

  ShootingResult out;
  out.solution = best.u;
  out.residual = best.r;
  out.residual_norm = best.norm;
  out.iterations = best.iterations;
  out.converged = best.converged;
  out.condition = best.condition;
  out.history = best.history;
  out.starts_used = starts;
  if (!out.converged && config.throw_on_failure) {
    std::ostringstream msg;
    msg << "shooting did not reach tolerance " << config.tol << " (best residual " << best.norm << ")";
    throw NonConvergence(msg.str(), best.u, best.norm, config.max_iter - budget);
  }
  return out;
}

}  // namespace mppgeo
