#pragma once

#include <string>
#include <vector>

#include "p2x/geometry.hpp"
#include "p2x/volume.hpp"

namespace p2x {

// 2D line-integral image (mm * intensity units) with pose metadata.
struct ProjectionImage {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;
  ViewPose pose;

  ProjectionImage() = default;
  ProjectionImage(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0f) {}

  float& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  float at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t pixel_count() const { return data.size(); }
};

enum class Channel { mr, xray, generated };

std::string channel_name(Channel c);
Channel channel_from_name(std::string_view name);

struct ProjectionSet {
  ConeBeamGeometry geometry;
  Trajectory trajectory;
  std::vector<ProjectionImage> images;
  std::string subject_id;
  Channel channel = Channel::mr;

  void validate() const;
};

// X-ray transform of the volume along one ray: midpoint quadrature over the
// slab-clipped ray segment, trilinear samples, physical step length included.
double line_integral(const Volume& vol, const Ray& ray, double step_mm);

ProjectionImage project_view(const Volume& vol, const ConeBeamGeometry& geom,
                             const ViewPose& pose, double step_mm);

ProjectionSet project_trajectory(const Volume& vol, const ConeBeamGeometry& geom,
                                 const Trajectory& traj, double step_mm,
                                 const std::string& subject_id, Channel channel);

// Directory layout: manifest.txt plus per-view view_<index>.img raw f32le.
void save_projection_set(const ProjectionSet& set, const std::string& dir,
                         const ArtifactStamp& stamp);
ProjectionSet load_projection_set(const std::string& dir);

// Manifest text round-trip helpers (exposed for the manifest round-trip test).
std::string serialize_set_manifest(const ProjectionSet& set, const ArtifactStamp& stamp);

ProjectionImage load_projection_image(const std::string& path, int rows, int cols);
void save_projection_image(const ProjectionImage& img, const std::string& path);

// 16-bit PGM export, min-max windowed, for visual inspection. The comment
// string, when non-empty, is embedded as a PGM comment line.
void save_pgm16(const ProjectionImage& img, const std::string& path,
                const std::string& comment = "");
void save_pgm16(const std::vector<float>& data, int rows, int cols, const std::string& path,
                const std::string& comment = "");

}  // namespace p2x
