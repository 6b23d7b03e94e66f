#include "p2x/geometry.hpp"

#include <cmath>

namespace p2x {

std::string beam_mode_name(BeamMode mode) {
  return mode == BeamMode::cone ? "cone" : "parallel";
}

BeamMode beam_mode_from_name(std::string_view name) {
  if (name == "cone") return BeamMode::cone;
  if (name == "parallel") return BeamMode::parallel;
  throw ArgumentError("unknown beam_mode '" + std::string(name) + "'");
}

void ConeBeamGeometry::validate() const {
  if (!(sad_mm > 0.0)) throw ArgumentError("geometry: sad_mm must be > 0");
  if (beam_mode == BeamMode::cone && !(sdd_mm > sad_mm)) {
    throw ArgumentError("geometry: sdd_mm must exceed sad_mm in cone mode");
  }
  if (det_rows < 1 || det_cols < 1) throw ArgumentError("geometry: detector counts must be >= 1");
  if (!(det_spacing_mm > 0.0)) throw ArgumentError("geometry: det_spacing_mm must be > 0");
}

ViewPose::ViewPose(double azimuth, double inclination) {
  if (!std::isfinite(azimuth) || !std::isfinite(inclination)) {
    throw ArgumentError("pose angles must be finite");
  }
  if (inclination < -90.0 || inclination > 90.0) {
    throw ArgumentError("inclination_deg must lie in [-90, 90]");
  }
  double az = std::fmod(azimuth, 360.0);
  if (az < 0.0) az += 360.0;
  azimuth_deg = az;
  inclination_deg = inclination;
}

std::string trajectory_label_name(TrajectoryLabel label) {
  switch (label) {
    case TrajectoryLabel::train: return "train";
    case TrajectoryLabel::test: return "test";
    default: return "custom";
  }
}

TrajectoryLabel trajectory_label_from_name(std::string_view name) {
  if (name == "train") return TrajectoryLabel::train;
  if (name == "test") return TrajectoryLabel::test;
  if (name == "custom") return TrajectoryLabel::custom;
  throw ArgumentError("unknown trajectory label '" + std::string(name) + "'");
}

Trajectory make_training_trajectory(int n_azimuth, int n_inclination, double incl_range_deg) {
  if (n_azimuth < 1 || n_inclination < 1) {
    throw ArgumentError("trajectory: azimuth/inclination counts must be >= 1");
  }
  if (!(incl_range_deg >= 0.0) || incl_range_deg > 90.0) {
    throw ArgumentError("trajectory: incl_range_deg must lie in [0, 90]");
  }
  Trajectory traj;
  traj.label = TrajectoryLabel::train;
  traj.poses.reserve(static_cast<std::size_t>(n_azimuth) * n_inclination);
  for (int a = 0; a < n_azimuth; ++a) {
    const double az = 360.0 * a / n_azimuth;
    for (int i = 0; i < n_inclination; ++i) {
      const double incl = n_inclination == 1
                              ? 0.0
                              : -incl_range_deg + 2.0 * incl_range_deg * i / (n_inclination - 1);
      traj.poses.emplace_back(az, incl);
    }
  }
  return traj;
}

Trajectory make_test_trajectory(int n_views) {
  if (n_views < 1) throw ArgumentError("trajectory: n_views must be >= 1");
  Trajectory traj;
  traj.label = TrajectoryLabel::test;
  traj.poses.reserve(n_views);
  for (int i = 0; i < n_views; ++i) {
    traj.poses.emplace_back(360.0 * i / n_views, 0.0);
  }
  return traj;
}

namespace {

struct PoseFrame {
  Vec3 e_r;  // isocenter -> source
  Vec3 e_u;  // detector column direction
  Vec3 e_v;  // detector row direction (+z at inclination 0)
};

PoseFrame pose_frame(const ViewPose& pose) {
  const double az = deg_to_rad(pose.azimuth_deg);
  const double in = deg_to_rad(pose.inclination_deg);
  const double ca = std::cos(az), sa = std::sin(az);
  const double ci = std::cos(in), si = std::sin(in);
  PoseFrame f;
  f.e_r = {ci * ca, ci * sa, si};
  f.e_u = {-sa, ca, 0.0};
  f.e_v = {-si * ca, -si * sa, ci};
  return f;
}

}  // namespace

Vec3 source_position(const ConeBeamGeometry& geom, const ViewPose& pose) {
  if (geom.beam_mode != BeamMode::cone) {
    throw ArgumentError("source_position: undefined in parallel mode");
  }
  return geom.sad_mm * pose_frame(pose).e_r;
}

Ray ray_for_pixel(const ConeBeamGeometry& geom, const ViewPose& pose, int row, int col) {
  if (row < 0 || row >= geom.det_rows || col < 0 || col >= geom.det_cols) {
    throw ArgumentError("ray_for_pixel: pixel out of range");
  }
  const PoseFrame f = pose_frame(pose);
  const double u_off = (col - 0.5 * (geom.det_cols - 1)) * geom.det_spacing_mm;
  const double v_off = (0.5 * (geom.det_rows - 1) - row) * geom.det_spacing_mm;

  Ray ray;
  if (geom.beam_mode == BeamMode::cone) {
    const Vec3 source = geom.sad_mm * f.e_r;
    // Detector plane orthogonal to the source-isocenter axis, principal point
    // at the detector center.
    const Vec3 pixel = (geom.sad_mm - geom.sdd_mm) * f.e_r + u_off * f.e_u + v_off * f.e_v;
    ray.origin_mm = source;
    ray.direction = (pixel - source).normalized();
  } else {
    ray.origin_mm = geom.sad_mm * f.e_r + u_off * f.e_u + v_off * f.e_v;
    ray.direction = {-f.e_r.x, -f.e_r.y, -f.e_r.z};
  }
  return ray;
}

std::string serialize_geometry(const ConeBeamGeometry& geom) {
  std::string s;
  s += "sad_mm=" + format_double(geom.sad_mm) + "\n";
  s += "sdd_mm=" + format_double(geom.sdd_mm) + "\n";
  s += "det_rows=" + std::to_string(geom.det_rows) + "\n";
  s += "det_cols=" + std::to_string(geom.det_cols) + "\n";
  s += "det_spacing_mm=" + format_double(geom.det_spacing_mm) + "\n";
  s += "beam_mode=" + beam_mode_name(geom.beam_mode) + "\n";
  return s;
}

ConeBeamGeometry parse_geometry(const std::vector<std::pair<std::string, std::string>>& kv) {
  ConeBeamGeometry g;
  bool seen[6] = {};
  for (const auto& [key, value] : kv) {
    if (key == "sad_mm") {
      g.sad_mm = parse_double(value, key);
      seen[0] = true;
    } else if (key == "sdd_mm") {
      g.sdd_mm = parse_double(value, key);
      seen[1] = true;
    } else if (key == "det_rows") {
      g.det_rows = static_cast<int>(parse_long(value, key));
      seen[2] = true;
    } else if (key == "det_cols") {
      g.det_cols = static_cast<int>(parse_long(value, key));
      seen[3] = true;
    } else if (key == "det_spacing_mm") {
      g.det_spacing_mm = parse_double(value, key);
      seen[4] = true;
    } else if (key == "beam_mode") {
      g.beam_mode = beam_mode_from_name(value);
      seen[5] = true;
    }
  }
  for (bool s : seen) {
    if (!s) throw ArgumentError("geometry block missing a required key");
  }
  g.validate();
  return g;
}

}  // namespace p2x
