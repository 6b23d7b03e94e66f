#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace p2x {

// Error hierarchy. The CLI maps ArgumentError/ContractError to exit code 1
// and IoError to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Contract violations detected at runtime (shape mismatches, degenerate
// data, pairing/split problems, bad checkpoints).
class ContractError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    const double n = norm();
    return {x / n, y / n, z / n};
  }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * (kPi / 180.0); }

// FNV-1a, used for config and architecture hashes embedded in artifacts.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string to_hex(std::uint64_t v);

// Shortest round-trip decimal formatting (std::to_chars); used for all
// numbers written into text artifacts so that re-runs are byte-identical.
std::string format_double(double v);
std::string format_float(float v);

std::vector<std::string> split(std::string_view s, char delim);
std::string trim(std::string_view s);

double parse_double(std::string_view s, std::string_view what);
long parse_long(std::string_view s, std::string_view what);

// Worker cap for OpenMP-parallel kernels; 0 keeps the runtime default.
void set_thread_cap(int n);
int thread_cap();

}  // namespace p2x
