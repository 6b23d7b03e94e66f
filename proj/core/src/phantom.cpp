#include "p2x/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace p2x {

namespace {

struct Ellipsoid {
  Vec3 center;
  Vec3 radii;

  bool contains(const Vec3& p) const {
    const double dx = (p.x - center.x) / radii.x;
    const double dy = (p.y - center.y) / radii.y;
    const double dz = (p.z - center.z) / radii.z;
    return dx * dx + dy * dy + dz * dz <= 1.0;
  }
};

struct Tube {
  std::vector<Vec3> points;
  double radius = 2.0;

  bool contains(const Vec3& p) const {
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
      const Vec3 a = points[i];
      const Vec3 b = points[i + 1];
      const Vec3 ab = b - a;
      const double len2 = ab.dot(ab);
      double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const Vec3 q = a + t * ab;
      if ((p - q).norm() <= radius) return true;
    }
    return false;
  }
};

Vec3 random_unit(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  while (true) {
    const Vec3 v{u(rng), u(rng), u(rng)};
    const double n = v.norm();
    if (n > 0.05 && n <= 1.0) return {v.x / n, v.y / n, v.z / n};
  }
}

}  // namespace

VolumePair generate_head_phantom(const HeadPhantomParams& params) {
  if (std::min({params.dims[0], params.dims[1], params.dims[2]}) < 16) {
    throw ArgumentError("head phantom: grid too small (min dim < 16)");
  }
  if (!(params.skull_thickness_mm > 0.0)) {
    throw ArgumentError("head phantom: skull_thickness_mm must be > 0");
  }
  if (params.truncate_axial_fraction < 0.0 || params.truncate_axial_fraction >= 1.0) {
    throw ArgumentError("head phantom: truncate_axial_fraction must lie in [0, 1)");
  }

  Volume ct = Volume::centered(params.dims, params.spacing_mm);
  Volume mr = Volume::centered(params.dims, params.spacing_mm);

  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  const double half_x = 0.5 * params.dims[0] * params.spacing_mm[0];
  const double half_y = 0.5 * params.dims[1] * params.spacing_mm[1];
  const double half_z = 0.5 * params.dims[2] * params.spacing_mm[2];
  const double ext = std::min({half_x, half_y, half_z});

  const double j = params.jitter;
  Ellipsoid head;
  head.center = {0.1 * ext * j * u(rng), 0.1 * ext * j * u(rng), 0.1 * ext * j * u(rng)};
  head.radii = {0.62 * ext * (1.0 + j * u(rng)), 0.78 * ext * (1.0 + j * u(rng)),
                0.82 * ext * (1.0 + j * u(rng))};

  const double scalp_mm = 0.05 * ext;
  Ellipsoid skull_outer{head.center,
                        {head.radii.x - scalp_mm, head.radii.y - scalp_mm, head.radii.z - scalp_mm}};
  const double t = params.skull_thickness_mm;
  Ellipsoid skull_inner{head.center,
                        {skull_outer.radii.x - t, skull_outer.radii.y - t, skull_outer.radii.z - t}};
  if (std::min({skull_inner.radii.x, skull_inner.radii.y, skull_inner.radii.z}) <= 2.0) {
    throw ArgumentError("head phantom: grid too small for the requested skull shell");
  }

  // Sinus cavities: small air ellipsoids centered on the shell midsurface,
  // biased toward the lower front.
  std::vector<Ellipsoid> cavities;
  for (int c = 0; c < params.n_sinus_cavities; ++c) {
    Vec3 dir = random_unit(rng);
    dir.y = std::abs(dir.y);
    dir.z = -std::abs(dir.z);
    const Vec3 mid{skull_outer.radii.x - 0.5 * t, skull_outer.radii.y - 0.5 * t,
                   skull_outer.radii.z - 0.5 * t};
    Ellipsoid cav;
    cav.center = {head.center.x + dir.x * mid.x, head.center.y + dir.y * mid.y,
                  head.center.z + dir.z * mid.z};
    const double r = 3.0 + 2.0 * std::abs(u(rng));
    cav.radii = {r, r, r * (1.0 + 0.3 * u(rng))};
    cavities.push_back(cav);
  }

  // Vessels: piecewise-linear bright-MR tubes inside the brain.
  std::vector<Tube> vessels;
  const double min_sp = std::min({params.spacing_mm[0], params.spacing_mm[1], params.spacing_mm[2]});
  for (int v = 0; v < params.n_vessels; ++v) {
    Tube tube;
    tube.radius = (1.0 + std::abs(u(rng))) * min_sp;
    Vec3 p{head.center.x + 0.4 * skull_inner.radii.x * u(rng),
           head.center.y + 0.4 * skull_inner.radii.y * u(rng),
           head.center.z + 0.3 * skull_inner.radii.z * u(rng) - 0.2 * skull_inner.radii.z};
    tube.points.push_back(p);
    const int n_segments = 4;
    for (int s = 0; s < n_segments; ++s) {
      Vec3 step = random_unit(rng);
      step.z = std::abs(step.z);  // drift upward
      const double len = 0.18 * skull_inner.radii.z;
      p = p + len * step;
      tube.points.push_back(p);
    }
    vessels.push_back(tube);
  }

  const MaterialTable& mat = params.materials;
  const int nx = params.dims[0], ny = params.dims[1], nz = params.dims[2];
  for (int k = 0; k < nz; ++k) {
    for (int jj = 0; jj < ny; ++jj) {
      for (int i = 0; i < nx; ++i) {
        const Vec3 p = ct.voxel_center(i, jj, k);
        const MaterialSpec* m = &mat.air;
        if (head.contains(p)) {
          if (skull_outer.contains(p)) {
            if (skull_inner.contains(p)) {
              m = &mat.soft;  // brain
              for (const auto& tube : vessels) {
                if (tube.contains(p)) {
                  m = &mat.vessel;
                  break;
                }
              }
            } else {
              m = &mat.bone;
              for (const auto& cav : cavities) {
                if (cav.contains(p)) {
                  m = &mat.air;
                  break;
                }
              }
            }
          } else {
            m = &mat.soft;  // scalp
          }
        }
        const std::size_t idx = ct.index(i, jj, k);
        ct.data[idx] = static_cast<float>(m->mu_per_mm);
        mr.data[idx] = static_cast<float>(m->mr_intensity);
      }
    }
  }

  if (params.truncate_axial_fraction > 0.0) {
    const int n_trunc = static_cast<int>(std::lround(nz * params.truncate_axial_fraction));
    for (int k = nz - n_trunc; k < nz; ++k) {
      for (int jj = 0; jj < ny; ++jj) {
        for (int i = 0; i < nx; ++i) {
          const std::size_t idx = ct.index(i, jj, k);
          ct.data[idx] = 0.0f;
          mr.data[idx] = 0.0f;
        }
      }
    }
  }

  return {std::move(ct), std::move(mr)};
}

Volume generate_analytic_phantom(AnalyticKind kind, const Volume& grid, Vec3 center_mm,
                                 Vec3 radii_mm, float value) {
  if (!(radii_mm.x > 0.0 && radii_mm.y > 0.0 && radii_mm.z > 0.0)) {
    throw ArgumentError("analytic phantom: radii must be > 0");
  }
  if (kind == AnalyticKind::sphere && !(radii_mm.x == radii_mm.y && radii_mm.y == radii_mm.z)) {
    throw ArgumentError("analytic phantom: sphere requires equal radii");
  }
  Volume vol(grid.dims, grid.spacing_mm, grid.origin_mm);
  const Ellipsoid e{center_mm, radii_mm};
  for (int k = 0; k < vol.dims[2]; ++k) {
    for (int j = 0; j < vol.dims[1]; ++j) {
      for (int i = 0; i < vol.dims[0]; ++i) {
        if (e.contains(vol.voxel_center(i, j, k))) vol.at(i, j, k) = value;
      }
    }
  }
  return vol;
}

Cohort generate_cohort(int n_subjects, const HeadPhantomParams& base, int n_truncated) {
  if (n_subjects < 1) throw ArgumentError("cohort: n_subjects must be >= 1");
  Cohort cohort;
  for (int s = 0; s < n_subjects; ++s) {
    HeadPhantomParams p = base;
    p.seed = base.seed + static_cast<std::uint64_t>(s);
    if (s >= n_truncated) p.truncate_axial_fraction = 0.0;
    char id[16];
    std::snprintf(id, sizeof(id), "s%02d", s);
    cohort.entries.push_back({id, p.seed, p.truncate_axial_fraction});
    cohort.pairs.push_back(generate_head_phantom(p));
  }
  return cohort;
}

std::string serialize_cohort_manifest(const Cohort& cohort, const ArtifactStamp& stamp) {
  std::string s;
  s += "format_version=" + std::to_string(stamp.format_version) + "\n";
  s += "config_hash=" + stamp.config_hash + "\n";
  s += "seed=" + std::to_string(stamp.seed) + "\n";
  s += "n_subjects=" + std::to_string(cohort.entries.size()) + "\n";
  s += "subjects:\n";
  for (const auto& e : cohort.entries) {
    s += e.subject_id + " " + std::to_string(e.seed) + " " +
         format_double(e.truncate_axial_fraction) + "\n";
  }
  return s;
}

std::vector<CohortEntry> parse_cohort_manifest(const std::string& text) {
  std::vector<CohortEntry> entries;
  std::istringstream in(text);
  std::string line;
  bool in_table = false;
  while (std::getline(in, line)) {
    if (line == "subjects:") {
      in_table = true;
      continue;
    }
    if (!in_table || line.empty()) continue;
    const auto parts = split(line, ' ');
    if (parts.size() != 3) throw IoError("bad cohort manifest row: " + line);
    entries.push_back({parts[0], static_cast<std::uint64_t>(parse_long(parts[1], "seed")),
                       parse_double(parts[2], "truncate_axial_fraction")});
  }
  return entries;
}

}  // namespace p2x
