// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace splatgen {

/// Caller passed a value that violates an operation's precondition.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A file is structurally malformed (missing fields, bad header, wrong type).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A file parsed but carries values the contract forbids (NaN, out of range).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Point cloud too flat/collinear for registration.
struct DegenerateGeometry : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Kinematic tree is cyclic, disconnected, or multi-rooted.
struct StructureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// IK failed to converge; carries the final residuals.
struct UnreachableTarget : std::runtime_error {
  UnreachableTarget(const std::string& msg, double pos_err, double rot_err)
      : std::runtime_error(msg), position_error(pos_err), rotation_error(rot_err) {}
  double position_error = 0.0;
  double rotation_error = 0.0;
};

/// A trajectory segment could not be solved; carries the failing step.
struct PlanningFailed : std::runtime_error {
  PlanningFailed(const std::string& msg, int step) : std::runtime_error(msg), step_index(step) {}
  int step_index = -1;
};

struct PlacementInfeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoFeasibleGrasp : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Camera-pose optimization ended above the acceptance threshold.
struct PoseEstimationFailed : std::runtime_error {
  PoseEstimationFailed(const std::string& msg, double loss)
      : std::runtime_error(msg), residual_loss(loss) {}
  double residual_loss = 0.0;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace splatgen
