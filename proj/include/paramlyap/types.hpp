#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace plyap {

using Index = Eigen::Index;
using cplx = std::complex<double>;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  NonConvergence,
  NearSingularPair,
  NotSPD,
  SingularMatrix,
  ZeroParameter,
  SingularPrecondBlock,
  MaxIterationsExceeded,
  AccuracyLoss,
  NotDissipative,
  BreakdownDetected,
  DegenerateProjection,
  SaturatedSpace,
  SingularProjectedEquation,
  NonPositiveMass,
  EvaluationBudgetExceeded,
  IndivisibleSize,
  IndexOutOfRange,
  EvenIndex,
  Unstable,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace plyap
