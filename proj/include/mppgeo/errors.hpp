#ifndef MPPGEO_ERRORS_HPP
#define MPPGEO_ERRORS_HPP

#include "mppgeo/types.hpp"

#include <stdexcept>
#include <string>

namespace mppgeo {

enum class ErrorKind {
  PathLeavesChart,
  StepTooCoarse,
  FrameDegenerate,
  NonFiniteState,
  NotHorizontal,
  NonConvergence,
  SingularJacobian,
  RankDeficient,
  SplittingInvalid,
  LiftDegenerate,
  InvalidModel,
  Config,
};

const char* to_string(ErrorKind kind);

class MppError : public std::runtime_error {
public:
  MppError(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

#define MPPGEO_DEFINE_ERROR(Name)                                        \
  class Name : public MppError {                                         \
  public:                                                                \
    explicit Name(const std::string& what) : MppError(ErrorKind::Name, what) {} \
  };

MPPGEO_DEFINE_ERROR(PathLeavesChart)
MPPGEO_DEFINE_ERROR(StepTooCoarse)
MPPGEO_DEFINE_ERROR(FrameDegenerate)
MPPGEO_DEFINE_ERROR(NonFiniteState)
MPPGEO_DEFINE_ERROR(NotHorizontal)
MPPGEO_DEFINE_ERROR(SingularJacobian)
MPPGEO_DEFINE_ERROR(RankDeficient)
MPPGEO_DEFINE_ERROR(SplittingInvalid)
MPPGEO_DEFINE_ERROR(LiftDegenerate)
MPPGEO_DEFINE_ERROR(InvalidModel)

#undef MPPGEO_DEFINE_ERROR

class ConfigError : public MppError {
public:
  explicit ConfigError(const std::string& what) : MppError(ErrorKind::Config, what) {}
};

/// Raised when shooting fails to reach tolerance; carries the best iterate.
class NonConvergence : public MppError {
public:
  NonConvergence(const std::string& what, Vec best, double best_norm, int iterations)
      : MppError(ErrorKind::NonConvergence, what),
        best_(std::move(best)),
        best_norm_(best_norm),
        iterations_(iterations) {}

  const Vec& best_iterate() const { return best_; }
  double best_norm() const { return best_norm_; }
  int iterations() const { return iterations_; }

private:
  Vec best_;
  double best_norm_;
  int iterations_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::PathLeavesChart: return "PathLeavesChart";
    case ErrorKind::StepTooCoarse: return "StepTooCoarse";
    case ErrorKind::FrameDegenerate: return "FrameDegenerate";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::NotHorizontal: return "NotHorizontal";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::SplittingInvalid: return "SplittingInvalid";
    case ErrorKind::LiftDegenerate: return "LiftDegenerate";
    case ErrorKind::InvalidModel: return "InvalidModel";
    case ErrorKind::Config: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace mppgeo

#endif  // MPPGEO_ERRORS_HPP
