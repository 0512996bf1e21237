#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace topoflow {

// Geometric points and vectors use a fixed 3-slot array; 2D meshes leave z = 0
// so all geometry kernels work unchanged for both dimensions.
using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline Vec3& operator+=(Vec3& a, const Vec3& b) { a[0] += b[0]; a[1] += b[1]; a[2] += b[2]; return a; }

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Invalid user input: bad case files, malformed meshes, inconsistent options.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A nonlinear solve did not converge at the current time step size. The
// driver catches this, cuts dt, and retries; it is not a user-facing error
// unless dt_min is reached.
class StepFailure : public std::runtime_error {
 public:
  explicit StepFailure(const std::string& what) : std::runtime_error(what) {}
};

// Unrecoverable numerical failure (dt_min reached, singular system, ...).
// The CLI maps this to exit code 1.
class RunAbort : public std::runtime_error {
 public:
  explicit RunAbort(const std::string& what) : std::runtime_error(what) {}
};

// Pressure unit used in case files and well controls.
inline constexpr double bar = 1.0e5;          // [Pa]
inline constexpr double centipoise = 1.0e-3;  // [Pa.s]

}  // namespace topoflow
