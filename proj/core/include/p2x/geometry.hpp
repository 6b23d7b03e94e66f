#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "p2x/common.hpp"

namespace p2x {

enum class BeamMode { cone, parallel };

std::string beam_mode_name(BeamMode mode);
BeamMode beam_mode_from_name(std::string_view name);

// C-arm style projection geometry. World frame is right-handed with the
// isocenter at the origin and +z along the patient axis; azimuth is measured
// in the transversal (x-y) plane.
struct ConeBeamGeometry {
  double sad_mm = 785.0;       // source to isocenter
  double sdd_mm = 1200.0;      // source to detector
  int det_rows = 256;
  int det_cols = 256;
  double det_spacing_mm = 1.2;
  BeamMode beam_mode = BeamMode::cone;

  void validate() const;
  bool operator==(const ConeBeamGeometry&) const = default;
};

// Azimuth is normalized into [0, 360) at construction so that poses differing
// by full turns yield bit-identical rays.
struct ViewPose {
  double azimuth_deg = 0.0;
  double inclination_deg = 0.0;

  ViewPose() = default;
  ViewPose(double azimuth, double inclination);
  bool operator==(const ViewPose&) const = default;
};

struct Ray {
  Vec3 origin_mm;
  Vec3 direction;  // unit length
};

enum class TrajectoryLabel { train, test, custom };

struct Trajectory {
  std::vector<ViewPose> poses;
  TrajectoryLabel label = TrajectoryLabel::custom;
};

std::string trajectory_label_name(TrajectoryLabel label);
TrajectoryLabel trajectory_label_from_name(std::string_view name);

// Equiangular azimuth x inclination grid; azimuths span [0, 360), inclinations
// span [-incl_range_deg, +incl_range_deg].
Trajectory make_training_trajectory(int n_azimuth, int n_inclination, double incl_range_deg);

// Transversal-plane sweep: n_views poses at inclination 0, azimuth step 360/n.
Trajectory make_test_trajectory(int n_views);

Vec3 source_position(const ConeBeamGeometry& geom, const ViewPose& pose);

Ray ray_for_pixel(const ConeBeamGeometry& geom, const ViewPose& pose, int row, int col);

// Flat key-value block (keys exactly: sad_mm, sdd_mm, det_rows, det_cols,
// det_spacing_mm, beam_mode) embedded in projection-set manifests.
std::string serialize_geometry(const ConeBeamGeometry& geom);
ConeBeamGeometry parse_geometry(const std::vector<std::pair<std::string, std::string>>& kv);

}  // namespace p2x
