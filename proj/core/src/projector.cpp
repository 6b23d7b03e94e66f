#include "p2x/projector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

namespace p2x {

std::string channel_name(Channel c) {
  switch (c) {
    case Channel::mr: return "mr";
    case Channel::xray: return "xray";
    default: return "generated";
  }
}

Channel channel_from_name(std::string_view name) {
  if (name == "mr") return Channel::mr;
  if (name == "xray") return Channel::xray;
  if (name == "generated") return Channel::generated;
  throw ArgumentError("unknown channel '" + std::string(name) + "'");
}

void ProjectionSet::validate() const {
  if (images.size() != trajectory.poses.size()) {
    throw ContractError("projection set: image count != pose count");
  }
  for (const auto& img : images) {
    if (img.rows != geometry.det_rows || img.cols != geometry.det_cols) {
      throw ContractError("projection set: image dimensions disagree with geometry");
    }
  }
}

double line_integral(const Volume& vol, const Ray& ray, double step_mm) {
  if (!(step_mm > 0.0) || !std::isfinite(step_mm)) {
    throw ArgumentError("line_integral: step_mm must be finite and > 0");
  }
  const Vec3& o = ray.origin_mm;
  const Vec3& d = ray.direction;
  if (!std::isfinite(o.x + o.y + o.z) || !std::isfinite(d.x + d.y + d.z)) {
    throw ArgumentError("line_integral: non-finite ray");
  }

  // Axis-aligned slab clipping against the volume bounding box.
  const Vec3 lo = vol.bounds_lo();
  const Vec3 hi = vol.bounds_hi();
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  const double ov[3] = {o.x, o.y, o.z};
  const double dv[3] = {d.x, d.y, d.z};
  const double lov[3] = {lo.x, lo.y, lo.z};
  const double hiv[3] = {hi.x, hi.y, hi.z};
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dv[a]) < 1e-12) {
      if (ov[a] < lov[a] || ov[a] > hiv[a]) return 0.0;
      continue;
    }
    double ta = (lov[a] - ov[a]) / dv[a];
    double tb = (hiv[a] - ov[a]) / dv[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t1 > t0)) return 0.0;

  const double length = t1 - t0;
  const long n = std::max(1L, static_cast<long>(std::ceil(length / step_mm)));
  const double dt = length / n;
  double sum = 0.0;
  for (long k = 0; k < n; ++k) {
    const double t = t0 + (k + 0.5) * dt;
    sum += vol.sample({o.x + t * d.x, o.y + t * d.y, o.z + t * d.z});
  }
  return sum * dt;
}

ProjectionImage project_view(const Volume& vol, const ConeBeamGeometry& geom,
                             const ViewPose& pose, double step_mm) {
  geom.validate();
  ProjectionImage img(geom.det_rows, geom.det_cols);
  img.pose = pose;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < geom.det_rows; ++r) {
    for (int c = 0; c < geom.det_cols; ++c) {
      img.at(r, c) = static_cast<float>(line_integral(vol, ray_for_pixel(geom, pose, r, c), step_mm));
    }
  }
  return img;
}

ProjectionSet project_trajectory(const Volume& vol, const ConeBeamGeometry& geom,
                                 const Trajectory& traj, double step_mm,
                                 const std::string& subject_id, Channel channel) {
  if (traj.poses.empty()) throw ArgumentError("project_trajectory: empty trajectory");
  ProjectionSet set;
  set.geometry = geom;
  set.trajectory = traj;
  set.subject_id = subject_id;
  set.channel = channel;
  set.images.reserve(traj.poses.size());
  for (const auto& pose : traj.poses) {
    set.images.push_back(project_view(vol, geom, pose, step_mm));
  }
  return set;
}

std::string serialize_set_manifest(const ProjectionSet& set, const ArtifactStamp& stamp) {
  std::string s;
  s += "format_version=" + std::to_string(stamp.format_version) + "\n";
  s += "config_hash=" + stamp.config_hash + "\n";
  s += "seed=" + std::to_string(stamp.seed) + "\n";
  s += "subject_id=" + set.subject_id + "\n";
  s += "channel=" + channel_name(set.channel) + "\n";
  s += "trajectory_label=" + trajectory_label_name(set.trajectory.label) + "\n";
  s += serialize_geometry(set.geometry);
  s += "n_views=" + std::to_string(set.trajectory.poses.size()) + "\n";
  s += "trajectory:\n";
  for (std::size_t i = 0; i < set.trajectory.poses.size(); ++i) {
    const auto& p = set.trajectory.poses[i];
    s += std::to_string(i) + " " + format_double(p.azimuth_deg) + " " +
         format_double(p.inclination_deg) + "\n";
  }
  return s;
}

namespace {

std::string view_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%04zu.img", index);
  return buf;
}

}  // namespace

void save_projection_image(const ProjectionImage& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f.write(reinterpret_cast<const char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size() * sizeof(float)));
  if (!f) throw IoError("short write to " + path);
}

ProjectionImage load_projection_image(const std::string& path, int rows, int cols) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  ProjectionImage img(rows, cols);
  f.read(reinterpret_cast<char*>(img.data.data()),
         static_cast<std::streamsize>(img.data.size() * sizeof(float)));
  if (f.gcount() != static_cast<std::streamsize>(img.data.size() * sizeof(float))) {
    throw IoError("payload size mismatch in " + path);
  }
  return img;
}

void save_projection_set(const ProjectionSet& set, const std::string& dir,
                         const ArtifactStamp& stamp) {
  set.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir);
  {
    std::ofstream m(dir + "/manifest.txt");
    if (!m) throw IoError("cannot write " + dir + "/manifest.txt");
    m << serialize_set_manifest(set, stamp);
  }
  for (std::size_t i = 0; i < set.images.size(); ++i) {
    save_projection_image(set.images[i], dir + "/" + view_filename(i));
  }
}

ProjectionSet load_projection_set(const std::string& dir) {
  std::ifstream m(dir + "/manifest.txt");
  if (!m) throw IoError("cannot open " + dir + "/manifest.txt");
  ProjectionSet set;
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  bool in_table = false;
  std::vector<ViewPose> poses;
  while (std::getline(m, line)) {
    if (line == "trajectory:") {
      in_table = true;
      continue;
    }
    if (!in_table) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      kv.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    } else {
      const auto parts = split(line, ' ');
      if (parts.size() != 3) throw IoError("bad trajectory row in " + dir + "/manifest.txt");
      poses.emplace_back(parse_double(parts[1], "azimuth_deg"),
                         parse_double(parts[2], "inclination_deg"));
    }
  }
  set.geometry = parse_geometry(kv);
  std::size_t n_views = 0;
  for (const auto& [key, value] : kv) {
    if (key == "subject_id") set.subject_id = value;
    else if (key == "channel") set.channel = channel_from_name(value);
    else if (key == "trajectory_label") set.trajectory.label = trajectory_label_from_name(value);
    else if (key == "n_views") n_views = static_cast<std::size_t>(parse_long(value, key));
  }
  if (poses.size() != n_views) throw IoError("trajectory table size mismatch in " + dir);
  set.trajectory.poses = std::move(poses);
  set.images.reserve(n_views);
  for (std::size_t i = 0; i < n_views; ++i) {
    auto img = load_projection_image(dir + "/" + view_filename(i), set.geometry.det_rows,
                                     set.geometry.det_cols);
    img.pose = set.trajectory.poses[i];
    set.images.push_back(std::move(img));
  }
  set.validate();
  return set;
}

void save_pgm16(const std::vector<float>& data, int rows, int cols, const std::string& path,
                const std::string& comment) {
  float lo = std::numeric_limits<float>::max();
  float hi = std::numeric_limits<float>::lowest();
  for (float v : data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const float range = hi > lo ? hi - lo : 1.0f;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << "P5\n";
  if (!comment.empty()) f << "# " << comment << "\n";
  f << cols << " " << rows << "\n65535\n";
  std::vector<unsigned char> buf(data.size() * 2);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto q = static_cast<std::uint16_t>(std::lround(65535.0f * (data[i] - lo) / range));
    buf[2 * i] = static_cast<unsigned char>(q >> 8);
    buf[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
  }
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void save_pgm16(const ProjectionImage& img, const std::string& path, const std::string& comment) {
  save_pgm16(img.data, img.rows, img.cols, path, comment);
}

}  // namespace p2x
