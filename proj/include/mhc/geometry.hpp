// 5-DoF machine kinematics: slew + boom + stick chain with a free-swinging
// tool suspended on two passive revolute joints.
//
// Frames and conventions (fixed here, referenced throughout the project):
//  - base frame: z up, x forward at slew = 0, right-handed.
//  - cabin frame: base frame rotated by the slew angle; x is radial
//    (away from the slew axis), y tangential.
//  - q = [slew, boom, stick, tool_x, tool_y] in rad. Boom is measured from
//    horizontal, stick relative to the boom direction.
//  - tool_y swings the grab in the cabin x-z plane, positive deflection
//    toward -x (inward); tool_x swings it along cabin y, positive toward +y.
//    These orientations make the tool-model support-acceleration terms carry
//    the printed signs while the bob still lags an accelerating support.
#pragma once

#include <array>
#include <cmath>

#include "mhc/common.hpp"

namespace mhc {

struct MachineGeometry {
  double boom_length = 6.5;        // m
  double stick_length = 5.0;       // m
  double pivot_forward = 1.5;      // m, boom pivot offset from slew axis
  double pivot_up = 2.0;           // m, boom pivot height above base origin
  double boom_mass = 3000.0;       // kg, lumped at link center
  double stick_mass = 2000.0;      // kg, lumped at link center
  double tool_mass = 1500.0;       // kg, grab treated as a point mass
  double tool_length_x = 2.0;      // m, pendulum length for the tool_x axis
  double tool_length_y = 2.0;      // m, pendulum length for the tool_y axis
  double boom_min = 0.1;           // rad
  double boom_max = 1.3;           // rad
  double stick_min = -2.4;         // rad, relative to boom
  double stick_max = -0.9;         // rad

  // Reach of the grab reference point with the tool hanging vertically,
  // boom low and stick stretched as far out as the limits allow.
  double max_reach() const {
    return pivot_forward + boom_length * std::cos(boom_min) +
           stick_length * std::cos(boom_min + stick_max);
  }

  bool valid() const {
    return boom_length > 0 && stick_length > 0 && tool_length_x > 0 &&
           tool_length_y > 0 && boom_mass >= 0 && stick_mass >= 0 &&
           tool_mass >= 0 && boom_min < boom_max && stick_min < stick_max;
  }
};

struct JointState {
  std::array<double, 5> q{};     // [slew, boom, stick, tool_x, tool_y]
  std::array<double, 5> qdot{};  // rad/s

  double slew() const { return q[0]; }
  double boom() const { return q[1]; }
  double stick() const { return q[2]; }
  double tool_x() const { return q[3]; }
  double tool_y() const { return q[4]; }
};

struct CartesianPose {
  double x = 0, y = 0, z = 0;  // m, grab reference point in the base frame
};

namespace detail {

// Planar (cabin-frame) x-z position of the stick tip.
inline void arm_plane(const JointState& js, const MachineGeometry& g,
                      double& r, double& z) {
  const double ab = js.boom();
  const double as = js.boom() + js.stick();
  r = g.pivot_forward + g.boom_length * std::cos(ab) +
      g.stick_length * std::cos(as);
  z = g.pivot_up + g.boom_length * std::sin(ab) +
      g.stick_length * std::sin(as);
}

// Cabin-frame displacement of the grab relative to the attachment point.
// Decoupled per-axis deflections; the vertical drop is the tool_y pendulum
// shortened by the tool_x deflection.
inline std::array<double, 3> tool_offset(const JointState& js,
                                         const MachineGeometry& g) {
  const double sx = std::sin(js.tool_x()), cx = std::cos(js.tool_x());
  const double sy = std::sin(js.tool_y()), cy = std::cos(js.tool_y());
  return {-g.tool_length_y * sy, g.tool_length_x * sx,
          -(g.tool_length_y * cy + g.tool_length_x * (cx - 1.0))};
}

}  // namespace detail

// Cabin-frame position of the tool attachment point (stick tip).
inline CartesianPose attachment_position_cabin(const JointState& js,
                                               const MachineGeometry& g) {
  double r, z;
  detail::arm_plane(js, g, r, z);
  return {r, 0.0, z};
}

// Base-frame position of the tool attachment point.
inline CartesianPose attachment_position(const JointState& js,
                                         const MachineGeometry& g) {
  double r, z;
  detail::arm_plane(js, g, r, z);
  const double c = std::cos(js.slew()), s = std::sin(js.slew());
  return {c * r, s * r, z};
}

// Grab reference point in the base frame.
inline CartesianPose forward_kinematics(const JointState& js,
                                        const MachineGeometry& g) {
  double r, z;
  detail::arm_plane(js, g, r, z);
  const auto d = detail::tool_offset(js, g);
  const double xc = r + d[0];
  const double yc = d[1];
  const double c = std::cos(js.slew()), s = std::sin(js.slew());
  return {c * xc - s * yc, s * xc + c * yc, z + d[2]};
}

// Horizontal distance of the grab from the slew axis. Used as r_y in the
// tool model (centrifugal lever arm) and for the too-close termination.
inline double grab_radial_distance(const JointState& js,
                                   const MachineGeometry& g) {
  const auto p = forward_kinematics(js, g);
  return std::hypot(p.x, p.y);
}

// Configuration-dependent inertia about the slew axis. Links are point
// masses at their geometric centers, the tool plus load a point mass at the
// grab.
inline double inertia_about_z(const JointState& js, const MachineGeometry& g,
                              double load_kg) {
  const double ab = js.boom();
  const double as = js.boom() + js.stick();
  const double r_boom =
      g.pivot_forward + 0.5 * g.boom_length * std::cos(ab);
  const double r_stick = g.pivot_forward + g.boom_length * std::cos(ab) +
                         0.5 * g.stick_length * std::cos(as);
  const double r_tool = grab_radial_distance(js, g);
  return g.boom_mass * r_boom * r_boom + g.stick_mass * r_stick * r_stick +
         (g.tool_mass + load_kg) * r_tool * r_tool;
}

struct AttachmentVelocity {
  double v_x = 0;  // m/s, radial (cabin x)
  double v_y = 0;  // m/s, tangential (slew rate x radial distance)
};

// Inertial velocity of the tool attachment point resolved in cabin axes.
inline AttachmentVelocity tool_attachment_velocity(const JointState& js,
                                                   const MachineGeometry& g) {
  const double ab = js.boom();
  const double as = js.boom() + js.stick();
  const double wb = js.qdot[1];
  const double ws = js.qdot[1] + js.qdot[2];
  const double r = g.pivot_forward + g.boom_length * std::cos(ab) +
                   g.stick_length * std::cos(as);
  AttachmentVelocity v;
  v.v_x = -g.boom_length * std::sin(ab) * wb - g.stick_length * std::sin(as) * ws;
  v.v_y = js.qdot[0] * r;
  return v;
}

}  // namespace mhc
