#pragma once

#include <stdexcept>
#include <string>

namespace algoforge {

// Failure taxonomy shared by the library and the CLI. Data/usage problems map to
// exit code 1, negative verdicts (infeasible, not certified, diverged) to exit 2.

struct IllPosed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotKronecker : std::runtime_error {
  double deviation;
  NotKronecker(const std::string& msg, double dev)
      : std::runtime_error(msg), deviation(dev) {}
};

struct NotSingleValued : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WellPosednessViolated : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularFixedPointSystem : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonConvergent : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Infeasible : std::runtime_error {
  double residual;
  Infeasible(const std::string& msg, double res)
      : std::runtime_error(msg), residual(res) {}
};

struct NotMinimal : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RankDeficientTheta1 : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RankDeficientPhi2 : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotInFamily : std::runtime_error {
  double deviation;
  NotInFamily(const std::string& msg, double dev)
      : std::runtime_error(msg), deviation(dev) {}
};

struct NotSynthesizable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MalformedProblem : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SolverUnknown : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NeverCertified : std::runtime_error {
  double deficit;
  NeverCertified(const std::string& msg, double def)
      : std::runtime_error(msg), deficit(def) {}
};

struct NotCertified : std::runtime_error {
  double deficit;
  NotCertified(const std::string& msg, double def)
      : std::runtime_error(msg), deficit(def) {}
};

}  // namespace algoforge
