#pragma once

#include <array>
#include <cmath>
#include <sstream>

#include "posegrid/error.hpp"
#include "posegrid/geometry.hpp"

namespace posegrid {

/// Euler angles mapped to [0, 1): a1 = phi1/2pi, a2 = phi2/2pi,
/// a3 = phi3*k/2pi. Revolution objects carry a3 = 0.
using NormalizedAngles = std::array<double, 3>;

inline NormalizedAngles angle_normalize(const EulerZYZ& e, const SymmetrySpec& sym) {
  auto check = [](double value, double upper, const char* name) {
    if (!(value >= 0.0 && value < upper)) {
      std::ostringstream msg;
      msg << "angle_normalize: " << name << " = " << value << " is outside [0, " << upper << ")";
      throw Error(ErrorCode::kInvalidArgument, msg.str());
    }
  };
  check(e.phi1, kTwoPi, "phi1");
  check(e.phi2, kTwoPi, "phi2");
  if (sym.kind() == SymmetryKind::kRevolution) return {e.phi1 / kTwoPi, e.phi2 / kTwoPi, 0.0};
  check(e.phi3, sym.angle_period(), "phi3");
  return {e.phi1 / kTwoPi, e.phi2 / kTwoPi, e.phi3 / sym.angle_period()};
}

/// Inverse of angle_normalize; accepts any finite input (network outputs).
inline EulerZYZ angle_denormalize(const NormalizedAngles& a, const SymmetrySpec& sym) {
  EulerZYZ e;
  e.phi1 = a[0] * kTwoPi;
  e.phi2 = a[1] * kTwoPi;
  e.phi3 = sym.kind() == SymmetryKind::kRevolution ? 0.0 : a[2] * sym.angle_period();
  return e;
}

/// Number of meaningful angle channels for a symmetry class.
inline int angle_channel_count(const SymmetrySpec& sym) {
  return sym.kind() == SymmetryKind::kRevolution ? 2 : 3;
}

}  // namespace posegrid
