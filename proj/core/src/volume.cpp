#include "p2x/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace p2x {

Volume::Volume(std::array<int, 3> d, std::array<double, 3> sp, std::array<double, 3> org)
    : dims(d), spacing_mm(sp), origin_mm(org) {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw ArgumentError("volume: dims must be >= 1");
    if (!(spacing_mm[a] > 0.0)) throw ArgumentError("volume: spacing must be > 0");
  }
  data.assign(voxel_count(), 0.0f);
}

Volume Volume::centered(std::array<int, 3> dims, std::array<double, 3> spacing) {
  std::array<double, 3> origin{};
  for (int a = 0; a < 3; ++a) origin[a] = -0.5 * (dims[a] - 1) * spacing[a];
  return Volume(dims, spacing, origin);
}

double Volume::min_spacing() const {
  return std::min({spacing_mm[0], spacing_mm[1], spacing_mm[2]});
}

Vec3 Volume::bounds_lo() const {
  return {origin_mm[0] - 0.5 * spacing_mm[0], origin_mm[1] - 0.5 * spacing_mm[1],
          origin_mm[2] - 0.5 * spacing_mm[2]};
}

Vec3 Volume::bounds_hi() const {
  return {origin_mm[0] + (dims[0] - 0.5) * spacing_mm[0],
          origin_mm[1] + (dims[1] - 0.5) * spacing_mm[1],
          origin_mm[2] + (dims[2] - 0.5) * spacing_mm[2]};
}

float Volume::sample(const Vec3& p) const {
  const double u = (p.x - origin_mm[0]) / spacing_mm[0];
  const double v = (p.y - origin_mm[1]) / spacing_mm[1];
  const double w = (p.z - origin_mm[2]) / spacing_mm[2];
  if (u < -0.5 || u > dims[0] - 0.5 || v < -0.5 || v > dims[1] - 0.5 || w < -0.5 ||
      w > dims[2] - 0.5) {
    return 0.0f;
  }
  const double fu = std::floor(u), fv = std::floor(v), fw = std::floor(w);
  const double au = u - fu, av = v - fv, aw = w - fw;
  const int i0 = std::clamp(static_cast<int>(fu), 0, dims[0] - 1);
  const int j0 = std::clamp(static_cast<int>(fv), 0, dims[1] - 1);
  const int k0 = std::clamp(static_cast<int>(fw), 0, dims[2] - 1);
  const int i1 = std::min(i0 + 1, dims[0] - 1);
  const int j1 = std::min(j0 + 1, dims[1] - 1);
  const int k1 = std::min(k0 + 1, dims[2] - 1);

  const double c00 = at(i0, j0, k0) * (1.0 - au) + at(i1, j0, k0) * au;
  const double c10 = at(i0, j1, k0) * (1.0 - au) + at(i1, j1, k0) * au;
  const double c01 = at(i0, j0, k1) * (1.0 - au) + at(i1, j0, k1) * au;
  const double c11 = at(i0, j1, k1) * (1.0 - au) + at(i1, j1, k1) * au;
  const double c0 = c00 * (1.0 - av) + c10 * av;
  const double c1 = c01 * (1.0 - av) + c11 * av;
  return static_cast<float>(c0 * (1.0 - aw) + c1 * aw);
}

void Volume::validate() const {
  if (data.size() != voxel_count()) throw ContractError("volume: data length != nx*ny*nz");
  for (float v : data) {
    if (!std::isfinite(v)) throw ContractError("volume: non-finite voxel value");
  }
}

namespace {

std::string triple_int(const std::array<int, 3>& a) {
  return std::to_string(a[0]) + "," + std::to_string(a[1]) + "," + std::to_string(a[2]);
}

std::string triple_double(const std::array<double, 3>& a) {
  return format_double(a[0]) + "," + format_double(a[1]) + "," + format_double(a[2]);
}

}  // namespace

void save_volume(const Volume& vol, const std::string& path_base, const ArtifactStamp& stamp) {
  {
    std::ofstream h(path_base + ".volh");
    if (!h) throw IoError("cannot write " + path_base + ".volh");
    h << "dims=" << triple_int(vol.dims) << "\n";
    h << "spacing_mm=" << triple_double(vol.spacing_mm) << "\n";
    h << "origin_mm=" << triple_double(vol.origin_mm) << "\n";
    h << "dtype=f32le\n";
    h << "order=x-fastest\n";
    h << "format_version=" << stamp.format_version << "\n";
    h << "config_hash=" << stamp.config_hash << "\n";
    h << "seed=" << stamp.seed << "\n";
  }
  std::ofstream f(path_base + ".vol", std::ios::binary);
  if (!f) throw IoError("cannot write " + path_base + ".vol");
  f.write(reinterpret_cast<const char*>(vol.data.data()),
          static_cast<std::streamsize>(vol.data.size() * sizeof(float)));
  if (!f) throw IoError("short write to " + path_base + ".vol");
}

Volume load_volume(const std::string& path_base) {
  std::ifstream h(path_base + ".volh");
  if (!h) throw IoError("cannot open " + path_base + ".volh");
  Volume vol;
  std::string line;
  bool have_dims = false;
  while (std::getline(h, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "dims") {
      const auto parts = split(value, ',');
      if (parts.size() != 3) throw IoError("bad dims in " + path_base + ".volh");
      for (int a = 0; a < 3; ++a) vol.dims[a] = static_cast<int>(parse_long(parts[a], "dims"));
      have_dims = true;
    } else if (key == "spacing_mm") {
      const auto parts = split(value, ',');
      if (parts.size() != 3) throw IoError("bad spacing in " + path_base + ".volh");
      for (int a = 0; a < 3; ++a) vol.spacing_mm[a] = parse_double(parts[a], "spacing_mm");
    } else if (key == "origin_mm") {
      const auto parts = split(value, ',');
      if (parts.size() != 3) throw IoError("bad origin in " + path_base + ".volh");
      for (int a = 0; a < 3; ++a) vol.origin_mm[a] = parse_double(parts[a], "origin_mm");
    } else if (key == "dtype") {
      if (value != "f32le") throw IoError("unsupported dtype '" + value + "'");
    } else if (key == "order") {
      if (value != "x-fastest") throw IoError("unsupported order '" + value + "'");
    }
  }
  if (!have_dims) throw IoError("missing dims in " + path_base + ".volh");

  std::ifstream f(path_base + ".vol", std::ios::binary);
  if (!f) throw IoError("cannot open " + path_base + ".vol");
  vol.data.resize(vol.voxel_count());
  f.read(reinterpret_cast<char*>(vol.data.data()),
         static_cast<std::streamsize>(vol.data.size() * sizeof(float)));
  if (f.gcount() != static_cast<std::streamsize>(vol.data.size() * sizeof(float))) {
    throw IoError("payload size mismatch in " + path_base + ".vol");
  }
  return vol;
}

}  // namespace p2x
