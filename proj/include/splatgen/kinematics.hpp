// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "splatgen/errors.hpp"
#include "splatgen/transforms.hpp"

namespace splatgen {

using VecX = Eigen::VectorXd;

enum class JointType { kRevolute, kPrismatic, kFixed };

struct Joint {
  std::string name;
  JointType type = JointType::kFixed;
  int parent_link = -1;
  int child_link = -1;
  RigidTransform origin;
  Vec3 axis{1, 0, 0};
  double lower = 0.0;
  double upper = 0.0;
  int q_index = -1;  // -1 for fixed joints
};

struct Link {
  std::string name;
  int parent_joint = -1;  // -1 for the root
};

/// Per-link point clouds in each link's local frame; `threshold` is the
/// assignment distance used by scene decomposition.
struct LinkPointClouds {
  std::map<std::string, std::vector<Vec3>> points;
  double threshold = 0.01;
};

/// Rooted kinematic tree with an end-effector link and tool frame.
/// Links are stored parents-before-children.
class KinematicChain {
 public:
  const std::vector<Link>& links() const { return links_; }
  const std::vector<Joint>& joints() const { return joints_; }
  int dof() const { return dof_; }
  const std::string& ee_link() const { return ee_link_; }
  const RigidTransform& tool_offset() const { return tool_offset_; }
  const VecX& q_default() const { return q_default_; }

  int link_index(const std::string& name) const {
    for (std::size_t i = 0; i < links_.size(); ++i)
      if (links_[i].name == name) return static_cast<int>(i);
    return -1;
  }

  void set_ee_link(const std::string& name) {
    if (link_index(name) < 0)
      throw InvalidArgument("KinematicChain: unknown ee_link '" + name + "'");
    ee_link_ = name;
  }

  void set_tool_offset(const RigidTransform& t) { tool_offset_ = t; }

  void set_q_default(const VecX& q) {
    if (q.size() != dof_) throw InvalidArgument("KinematicChain: q_default dimension mismatch");
    for (const Joint& j : joints_)
      if (j.q_index >= 0 && (q[j.q_index] < j.lower - 1e-9 || q[j.q_index] > j.upper + 1e-9))
        throw InvalidArgument("KinematicChain: q_default outside limits of joint '" + j.name +
                              "'");
    q_default_ = q;
  }

  VecX clamp_to_limits(VecX q) const {
    for (const Joint& j : joints_)
      if (j.q_index >= 0) q[j.q_index] = std::clamp(q[j.q_index], j.lower, j.upper);
    return q;
  }

  bool within_limits(const VecX& q, double tol = 1e-9) const {
    for (const Joint& j : joints_)
      if (j.q_index >= 0 && (q[j.q_index] < j.lower - tol || q[j.q_index] > j.upper + tol))
        return false;
    return true;
  }

 private:
  friend KinematicChain parse_chain(const std::string&);
  std::vector<Link> links_;
  std::vector<Joint> joints_;
  int dof_ = 0;
  std::string ee_link_;
  RigidTransform tool_offset_;
  VecX q_default_;
};

namespace detail {

inline Vec3 parse_xyz(const std::string& s, const char* what) {
  std::istringstream is(s);
  Vec3 v;
  if (!(is >> v.x() >> v.y() >> v.z()))
    throw FormatError(std::string("parse_chain: malformed ") + what + " '" + s + "'");
  return v;
}

inline RigidTransform parse_origin(const boost::property_tree::ptree& node) {
  RigidTransform t;
  if (auto origin = node.get_child_optional("origin")) {
    const std::string xyz = origin->get<std::string>("<xmlattr>.xyz", "0 0 0");
    const std::string rpy = origin->get<std::string>("<xmlattr>.rpy", "0 0 0");
    t.translation = parse_xyz(xyz, "origin xyz");
    const Vec3 e = parse_xyz(rpy, "origin rpy");
    t.rotation = Quat(Eigen::AngleAxisd(e.z(), Vec3::UnitZ()) *
                      Eigen::AngleAxisd(e.y(), Vec3::UnitY()) *
                      Eigen::AngleAxisd(e.x(), Vec3::UnitX()));
  }
  return t;
}

}  // namespace detail

/// Parses a URDF document (revolute/prismatic/fixed/continuous joints).
/// Continuous joints become revolute with limits [-pi, pi]. Visual and
/// collision geometry are ignored; point clouds are supplied separately.
inline KinematicChain parse_chain(const std::string& urdf_text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(urdf_text);
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw FormatError(std::string("parse_chain: XML parse failure: ") + e.what());
  }
  auto robot = tree.get_child_optional("robot");
  if (!robot) throw FormatError("parse_chain: missing <robot> element");

  KinematicChain chain;
  std::vector<Link> links;
  for (const auto& [key, node] : *robot) {
    if (key != "link") continue;
    Link l;
    l.name = node.get<std::string>("<xmlattr>.name", "");
    if (l.name.empty()) throw FormatError("parse_chain: link without a name");
    links.push_back(l);
  }
  if (links.empty()) throw FormatError("parse_chain: no links");
  auto index_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < links.size(); ++i)
      if (links[i].name == name) return static_cast<int>(i);
    return -1;
  };

  std::vector<Joint> joints;
  for (const auto& [key, node] : *robot) {
    if (key != "joint") continue;
    Joint j;
    j.name = node.get<std::string>("<xmlattr>.name", "");
    const std::string type = node.get<std::string>("<xmlattr>.type", "");
    if (type == "revolute") j.type = JointType::kRevolute;
    else if (type == "prismatic") j.type = JointType::kPrismatic;
    else if (type == "fixed") j.type = JointType::kFixed;
    else if (type == "continuous") {
      j.type = JointType::kRevolute;
      j.lower = -std::numbers::pi;
      j.upper = std::numbers::pi;
    } else {
      throw FormatError("parse_chain: unsupported joint type '" + type + "' in joint '" +
                        j.name + "'");
    }
    j.parent_link = index_of(node.get<std::string>("parent.<xmlattr>.link", ""));
    j.child_link = index_of(node.get<std::string>("child.<xmlattr>.link", ""));
    if (j.parent_link < 0 || j.child_link < 0)
      throw FormatError("parse_chain: joint '" + j.name + "' references an unknown link");
    j.origin = detail::parse_origin(node);
    if (auto axis = node.get_child_optional("axis"))
      j.axis = detail::parse_xyz(axis->get<std::string>("<xmlattr>.xyz", "1 0 0"), "axis xyz");
    const double n = j.axis.norm();
    if (n < 1e-12) throw FormatError("parse_chain: zero axis in joint '" + j.name + "'");
    j.axis /= n;
    if (j.type != JointType::kFixed && type != "continuous") {
      auto limit = node.get_child_optional("limit");
      if (!limit)
        throw FormatError("parse_chain: joint '" + j.name + "' missing <limit>");
      j.lower = limit->get<double>("<xmlattr>.lower", 0.0);
      j.upper = limit->get<double>("<xmlattr>.upper", 0.0);
      if (j.lower > j.upper)
        throw FormatError("parse_chain: joint '" + j.name + "' has lower > upper");
    }
    joints.push_back(j);
  }

  // Structure checks: every link except one root has exactly one parent.
  std::vector<int> parent_joint(links.size(), -1);
  for (std::size_t k = 0; k < joints.size(); ++k) {
    const int child = joints[k].child_link;
    if (parent_joint[child] >= 0)
      throw StructureError("parse_chain: link '" + links[child].name + "' has two parents");
    parent_joint[child] = static_cast<int>(k);
  }
  int root = -1;
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (parent_joint[i] < 0) {
      if (root >= 0)
        throw StructureError("parse_chain: multiple roots ('" + links[root].name + "', '" +
                             links[i].name + "')");
      root = static_cast<int>(i);
    }
  }
  if (root < 0) throw StructureError("parse_chain: cyclic structure, no root link");

  // Topological order from the root; anything unreachable is disconnected.
  std::vector<int> order{root};
  std::vector<bool> seen(links.size(), false);
  seen[root] = true;
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (std::size_t k = 0; k < joints.size(); ++k)
      if (joints[k].parent_link == order[head] && !seen[joints[k].child_link]) {
        seen[joints[k].child_link] = true;
        order.push_back(joints[k].child_link);
      }
  }
  if (order.size() != links.size())
    throw StructureError("parse_chain: disconnected links in the tree");

  // Re-index links in topological order.
  std::vector<int> new_index(links.size());
  for (std::size_t i = 0; i < order.size(); ++i) new_index[order[i]] = static_cast<int>(i);
  chain.links_.resize(links.size());
  for (std::size_t i = 0; i < links.size(); ++i) {
    chain.links_[new_index[i]].name = links[i].name;
    chain.links_[new_index[i]].parent_joint = -1;
  }
  chain.joints_ = joints;
  int q_count = 0;
  for (std::size_t k = 0; k < chain.joints_.size(); ++k) {
    Joint& j = chain.joints_[k];
    j.parent_link = new_index[j.parent_link];
    j.child_link = new_index[j.child_link];
    chain.links_[j.child_link].parent_joint = static_cast<int>(k);
    if (j.type != JointType::kFixed) j.q_index = q_count++;
  }
  chain.dof_ = q_count;
  chain.q_default_ = VecX::Zero(q_count);
  for (const Joint& j : chain.joints_)
    if (j.q_index >= 0)
      chain.q_default_[j.q_index] = std::clamp(0.0, j.lower, j.upper);
  chain.ee_link_ = chain.links_.back().name;
  return chain;
}

/// Base-frame pose of every link at configuration `q` (root = identity).
inline std::vector<RigidTransform> forward_kinematics(const KinematicChain& chain,
                                                      const VecX& q) {
  if (q.size() != chain.dof())
    throw InvalidArgument("forward_kinematics: configuration dimension mismatch");
  std::vector<RigidTransform> poses(chain.links().size());
  for (std::size_t i = 1; i < chain.links().size(); ++i) {
    const Joint& j = chain.joints()[chain.links()[i].parent_joint];
    RigidTransform motion;
    if (j.type == JointType::kRevolute)
      motion.rotation = quat_from_rotvec(j.axis * q[j.q_index]);
    else if (j.type == JointType::kPrismatic)
      motion.translation = j.axis * q[j.q_index];
    poses[i] = poses[j.parent_link] * j.origin * motion;
  }
  return poses;
}

/// Base-frame pose of the tool frame (ee_link composed with tool_offset).
inline RigidTransform tool_pose(const KinematicChain& chain, const VecX& q) {
  const auto poses = forward_kinematics(chain, q);
  const int ee = chain.link_index(chain.ee_link());
  return poses[ee] * chain.tool_offset();
}

inline constexpr double kIkPositionTol = 1e-3;          // 1 mm
inline constexpr double kIkRotationTol = 0.5 * std::numbers::pi / 180.0;  // 0.5 deg

/// Damped-least-squares IK on the 6D pose error of the tool frame.
/// Joint limits are clamped every iteration; throws UnreachableTarget when
/// the residual is above (1 mm, 0.5 deg) after `max_iterations`.
inline VecX inverse_kinematics(const KinematicChain& chain, const RigidTransform& target,
                               const VecX& q_seed, int max_iterations = 200,
                               double damping = 1e-3) {
  if (q_seed.size() != chain.dof())
    throw InvalidArgument("inverse_kinematics: seed dimension mismatch");
  if (!target.translation.allFinite())
    throw InvalidArgument("inverse_kinematics: non-finite target");
  const int ee = chain.link_index(chain.ee_link());

  VecX q = chain.clamp_to_limits(q_seed);
  double pos_err = 0.0, rot_err = 0.0;
  for (int iter = 0; iter <= max_iterations; ++iter) {
    const auto poses = forward_kinematics(chain, q);
    const RigidTransform tool = poses[ee] * chain.tool_offset();
    const Vec3 dp = target.translation - tool.translation;
    const Vec3 dr = rotvec_from_quat(target.rotation * tool.rotation.conjugate());
    pos_err = dp.norm();
    rot_err = dr.norm();
    if (pos_err < kIkPositionTol && rot_err < kIkRotationTol) return q;
    if (iter == max_iterations) break;

    Eigen::Matrix<double, 6, Eigen::Dynamic> jac =
        Eigen::Matrix<double, 6, Eigen::Dynamic>::Zero(6, chain.dof());
    // Walk ancestors of the ee link; joints off that path have zero columns.
    for (int link = ee; chain.links()[link].parent_joint >= 0;
         link = chain.joints()[chain.links()[link].parent_joint].parent_link) {
      const Joint& j = chain.joints()[chain.links()[link].parent_joint];
      if (j.q_index < 0) continue;
      const RigidTransform joint_frame = poses[j.parent_link] * j.origin;
      const Vec3 axis_w = joint_frame.rotation * j.axis;
      if (j.type == JointType::kRevolute) {
        jac.block<3, 1>(0, j.q_index) = axis_w.cross(tool.translation - joint_frame.translation);
        jac.block<3, 1>(3, j.q_index) = axis_w;
      } else {
        jac.block<3, 1>(0, j.q_index) = axis_w;
      }
    }

    Vec6 e;
    e << dp, dr;
    const Eigen::Matrix<double, 6, 6> jjt =
        jac * jac.transpose() + damping * damping * Eigen::Matrix<double, 6, 6>::Identity();
    const VecX dq = jac.transpose() * jjt.ldlt().solve(e);
    q = chain.clamp_to_limits(q + dq);
  }
  std::ostringstream msg;
  msg << "inverse_kinematics: no convergence (position error " << pos_err << " m, rotation error "
      << rot_err << " rad)";
  throw UnreachableTarget(msg.str(), pos_err, rot_err);
}

/// Maps each link's local points through its FK pose.
inline std::map<std::string, std::vector<Vec3>> link_points_world(const KinematicChain& chain,
                                                                  const VecX& q,
                                                                  const LinkPointClouds& clouds) {
  for (const auto& [name, pts] : clouds.points)
    if (chain.link_index(name) < 0)
      throw InvalidArgument("link_points_world: unknown link '" + name + "'");
  const auto poses = forward_kinematics(chain, q);
  std::map<std::string, std::vector<Vec3>> out;
  for (const Link& link : chain.links()) {
    std::vector<Vec3>& dst = out[link.name];
    const auto it = clouds.points.find(link.name);
    if (it == clouds.points.end()) continue;
    const RigidTransform& t = poses[chain.link_index(link.name)];
    dst.reserve(it->second.size());
    for (const Vec3& p : it->second) dst.push_back(t.apply(p));
  }
  return out;
}

}  // namespace splatgen
