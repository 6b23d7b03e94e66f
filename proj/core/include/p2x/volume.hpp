#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "p2x/common.hpp"

namespace p2x {

// 3D scalar grid, 32-bit float, x-fastest layout. origin_mm is the world
// position of the center of voxel (0,0,0).
struct Volume {
  std::array<int, 3> dims{1, 1, 1};
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};
  std::array<double, 3> origin_mm{0.0, 0.0, 0.0};
  std::vector<float> data;

  Volume() = default;
  Volume(std::array<int, 3> d, std::array<double, 3> sp, std::array<double, 3> org);

  // Grid of the given dims/spacing centered on the world origin.
  static Volume centered(std::array<int, 3> dims, std::array<double, 3> spacing);

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(k) * dims[0] * dims[1] +
           static_cast<std::size_t>(j) * dims[0] + i;
  }
  float& at(int i, int j, int k) { return data[index(i, j, k)]; }
  float at(int i, int j, int k) const { return data[index(i, j, k)]; }

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }

  Vec3 voxel_center(int i, int j, int k) const {
    return {origin_mm[0] + i * spacing_mm[0], origin_mm[1] + j * spacing_mm[1],
            origin_mm[2] + k * spacing_mm[2]};
  }

  double min_spacing() const;

  // Physical bounding box: voxel boundaries, half a voxel beyond the outer
  // voxel centers.
  Vec3 bounds_lo() const;
  Vec3 bounds_hi() const;

  // Trilinear interpolation with clamped boundary neighbors; returns 0 for
  // points outside the bounding box.
  float sample(const Vec3& p) const;

  void validate() const;
};

struct ArtifactStamp {
  std::string config_hash = "0000000000000000";
  std::uint64_t seed = 0;
  int format_version = 1;
};

// <path>.volh text header + <path>.vol raw little-endian f32 payload.
void save_volume(const Volume& vol, const std::string& path_base, const ArtifactStamp& stamp);
Volume load_volume(const std::string& path_base);

}  // namespace p2x
