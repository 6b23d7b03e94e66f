#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "p2x/projector.hpp"
#include "p2x/tensor.hpp"

namespace p2x {

class PairingError : public ContractError {
 public:
  using ContractError::ContractError;
};

class SplitError : public ContractError {
 public:
  using ContractError::ContractError;
};

class DegenerateDataError : public ContractError {
 public:
  using ContractError::ContractError;
};

enum class StatsScope { per_subject, global };

struct NormalizationStats {
  double mean = 0.0;
  double std = 1.0;
  StatsScope scope = StatsScope::per_subject;
};

// Population mean/std over all pixels of the collection.
NormalizationStats compute_stats(const std::vector<const ProjectionImage*>& images,
                                 StatsScope scope);

void normalize(std::vector<float>& pixels, const NormalizationStats& stats);
void denormalize(std::vector<float>& pixels, const NormalizationStats& stats);
ProjectionImage normalize(const ProjectionImage& img, const NormalizationStats& stats);

enum class Split { train, test };

std::string split_name(Split s);
Split split_from_name(std::string_view name);

struct SampleRef {
  std::string subject_id;
  int pose_index = 0;
  double azimuth_deg = 0.0;
  double inclination_deg = 0.0;
  std::string input_path;  // relative to the manifest directory
  std::string label_path;
  Split split = Split::train;
};

struct SubjectStats {
  Split split = Split::train;
  NormalizationStats mr;
  NormalizationStats label;  // used only in per-subject label scope
};

struct DatasetManifest {
  int det_rows = 0;
  int det_cols = 0;
  StatsScope label_scope = StatsScope::global;
  NormalizationStats label_global;  // from training subjects only
  std::map<std::string, SubjectStats> subjects;
  std::vector<SampleRef> samples;

  const NormalizationStats& label_stats_for(const std::string& subject_id) const;
};

struct SubjectProjections {
  std::string subject_id;
  const ProjectionSet* mr = nullptr;
  const ProjectionSet* xray = nullptr;
  std::string mr_dir;    // relative paths recorded in the manifest
  std::string xray_dir;
};

struct SplitSpec {
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;
};

// Pairs views by (subject, pose index). MR inputs are normalized per subject;
// X-ray labels use global training-set statistics by default so that metric
// percentages are comparable across subjects (per-subject mode available).
// Test subjects never contribute to the global label statistics.
DatasetManifest build_dataset(const std::vector<SubjectProjections>& subjects,
                              const SplitSpec& split, StatsScope label_scope);

std::string serialize_dataset_manifest(const DatasetManifest& manifest, const ArtifactStamp& stamp);
DatasetManifest parse_dataset_manifest(const std::string& text);

void save_dataset_manifest(const DatasetManifest& manifest, const std::string& dir,
                           const ArtifactStamp& stamp);
DatasetManifest load_dataset_manifest(const std::string& dir);

// One training/evaluation pair: normalized input and label plus the raw label
// pixels (the denormalized intensity domain used by the masked metrics).
struct PairedSample {
  std::string subject_id;
  ViewPose pose;
  int rows = 0;
  int cols = 0;
  nn::Tensor input;   // (1,1,H,W), normalized MR
  nn::Tensor label;   // (1,1,H,W), normalized X-ray
  std::vector<float> label_raw;
};

PairedSample load_sample(const DatasetManifest& manifest, const std::string& base_dir,
                         std::size_t sample_index);

std::vector<std::size_t> sample_indices(const DatasetManifest& manifest, Split split);

}  // namespace p2x
