#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "p2x/volume.hpp"

namespace p2x {

struct MaterialSpec {
  std::string name;
  double mu_per_mm = 0.0;   // CT attenuation
  double mr_intensity = 0.0;
};

// Default material table; values are design constants, tests assert orderings
// only. Bone is CT-bright and MR-dark, air is dark in both, vessels MR-bright.
struct MaterialTable {
  MaterialSpec air{"air", 0.0, 0.0};
  MaterialSpec soft{"soft_tissue", 0.019, 0.6};
  MaterialSpec bone{"bone", 0.048, 0.02};
  MaterialSpec vessel{"vessel", 0.021, 1.0};
};

struct HeadPhantomParams {
  std::uint64_t seed = 0;
  std::array<int, 3> dims{128, 128, 128};
  std::array<double, 3> spacing_mm{1.5, 1.5, 1.5};
  double skull_thickness_mm = 6.0;
  int n_sinus_cavities = 3;
  int n_vessels = 6;
  double jitter = 0.08;                 // relative geometric randomization
  double truncate_axial_fraction = 0.0; // top fraction of z-slices zeroed
  MaterialTable materials;
};

struct VolumePair {
  Volume ct;
  Volume mr;
};

// Voxel-aligned CT/MR pair: soft-tissue head ellipsoid, bone shell, brain,
// air cavities embedded in the shell, MR-bright vessel tubes in the brain.
VolumePair generate_head_phantom(const HeadPhantomParams& params);

enum class AnalyticKind { sphere, ellipsoid };

// Binary implicit-surface phantom (voxel center inside => value); supports
// the analytic chord-length oracles.
Volume generate_analytic_phantom(AnalyticKind kind, const Volume& grid, Vec3 center_mm,
                                 Vec3 radii_mm, float value);

struct CohortEntry {
  std::string subject_id;
  std::uint64_t seed = 0;
  double truncate_axial_fraction = 0.0;
};

struct Cohort {
  std::vector<CohortEntry> entries;
  std::vector<VolumePair> pairs;
};

// n pairs with seeds base.seed + index; truncation from the base params is
// applied to the first n_truncated subjects.
Cohort generate_cohort(int n_subjects, const HeadPhantomParams& base, int n_truncated = 0);

std::string serialize_cohort_manifest(const Cohort& cohort, const ArtifactStamp& stamp);
std::vector<CohortEntry> parse_cohort_manifest(const std::string& text);

}  // namespace p2x
