#include "p2x/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace p2x {

NormalizationStats compute_stats(const std::vector<const ProjectionImage*>& images,
                                 StatsScope scope) {
  std::size_t count = 0;
  double sum = 0.0;
  for (const auto* img : images) {
    for (float v : img->data) sum += v;
    count += img->data.size();
  }
  if (count == 0) throw ArgumentError("compute_stats: empty collection");
  const double mean = sum / static_cast<double>(count);
  double sq = 0.0;
  for (const auto* img : images) {
    for (float v : img->data) {
      const double d = v - mean;
      sq += d * d;
    }
  }
  const double std_dev = std::sqrt(sq / static_cast<double>(count));  // population
  if (!(std_dev > 0.0)) {
    throw DegenerateDataError("compute_stats: constant collection (std = 0)");
  }
  return {mean, std_dev, scope};
}

void normalize(std::vector<float>& pixels, const NormalizationStats& stats) {
  const float m = static_cast<float>(stats.mean);
  const float s = static_cast<float>(stats.std);
  for (float& v : pixels) v = (v - m) / s;
}

void denormalize(std::vector<float>& pixels, const NormalizationStats& stats) {
  const float m = static_cast<float>(stats.mean);
  const float s = static_cast<float>(stats.std);
  for (float& v : pixels) v = v * s + m;
}

ProjectionImage normalize(const ProjectionImage& img, const NormalizationStats& stats) {
  ProjectionImage out = img;
  normalize(out.data, stats);
  return out;
}

std::string split_name(Split s) { return s == Split::train ? "train" : "test"; }

Split split_from_name(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  throw ArgumentError("unknown split '" + std::string(name) + "'");
}

const NormalizationStats& DatasetManifest::label_stats_for(const std::string& subject_id) const {
  if (label_scope == StatsScope::global) return label_global;
  auto it = subjects.find(subject_id);
  if (it == subjects.end()) throw ContractError("unknown subject '" + subject_id + "'");
  return it->second.label;
}

namespace {

std::string view_path(const std::string& dir, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "/view_%04zu.img", index);
  return dir + buf;
}

}  // namespace

DatasetManifest build_dataset(const std::vector<SubjectProjections>& subjects,
                              const SplitSpec& split, StatsScope label_scope) {
  std::set<std::string> train_ids(split.train_subjects.begin(), split.train_subjects.end());
  std::set<std::string> test_ids(split.test_subjects.begin(), split.test_subjects.end());
  for (const auto& id : train_ids) {
    if (test_ids.count(id)) {
      throw SplitError("subject '" + id + "' appears in both train and test partitions");
    }
  }

  DatasetManifest manifest;
  manifest.label_scope = label_scope;

  std::vector<const ProjectionImage*> train_labels;
  for (const auto& subj : subjects) {
    if (!subj.mr || !subj.xray) throw ArgumentError("build_dataset: null projection set");
    const auto& mr = *subj.mr;
    const auto& xr = *subj.xray;
    if (mr.trajectory.poses.size() != xr.trajectory.poses.size()) {
      throw PairingError("subject '" + subj.subject_id + "': MR and X-ray view counts differ");
    }
    for (std::size_t i = 0; i < mr.trajectory.poses.size(); ++i) {
      if (!(mr.trajectory.poses[i] == xr.trajectory.poses[i])) {
        throw PairingError("subject '" + subj.subject_id + "': trajectories disagree at view " +
                           std::to_string(i));
      }
    }
    if (mr.geometry.det_rows != xr.geometry.det_rows ||
        mr.geometry.det_cols != xr.geometry.det_cols) {
      throw PairingError("subject '" + subj.subject_id + "': image dimensions disagree");
    }
    if (manifest.det_rows == 0) {
      manifest.det_rows = mr.geometry.det_rows;
      manifest.det_cols = mr.geometry.det_cols;
    } else if (manifest.det_rows != mr.geometry.det_rows ||
               manifest.det_cols != mr.geometry.det_cols) {
      throw PairingError("subject '" + subj.subject_id + "': dimensions differ from the cohort");
    }

    const bool is_test = test_ids.count(subj.subject_id) > 0;
    if (!is_test && !train_ids.count(subj.subject_id)) {
      throw SplitError("subject '" + subj.subject_id + "' missing from the split specification");
    }

    SubjectStats stats;
    stats.split = is_test ? Split::test : Split::train;
    std::vector<const ProjectionImage*> mr_imgs;
    std::vector<const ProjectionImage*> label_imgs;
    for (const auto& img : mr.images) mr_imgs.push_back(&img);
    for (const auto& img : xr.images) label_imgs.push_back(&img);
    stats.mr = compute_stats(mr_imgs, StatsScope::per_subject);
    stats.label = compute_stats(label_imgs, StatsScope::per_subject);
    manifest.subjects[subj.subject_id] = stats;

    if (!is_test) {
      for (const auto& img : xr.images) train_labels.push_back(&img);
    }

    for (std::size_t i = 0; i < mr.trajectory.poses.size(); ++i) {
      SampleRef ref;
      ref.subject_id = subj.subject_id;
      ref.pose_index = static_cast<int>(i);
      ref.azimuth_deg = mr.trajectory.poses[i].azimuth_deg;
      ref.inclination_deg = mr.trajectory.poses[i].inclination_deg;
      ref.input_path = view_path(subj.mr_dir, i);
      ref.label_path = view_path(subj.xray_dir, i);
      ref.split = stats.split;
      manifest.samples.push_back(std::move(ref));
    }
  }

  if (train_labels.empty()) throw SplitError("build_dataset: no training subjects");
  manifest.label_global = compute_stats(train_labels, StatsScope::global);
  return manifest;
}

std::string serialize_dataset_manifest(const DatasetManifest& manifest,
                                       const ArtifactStamp& stamp) {
  std::string s;
  s += "format_version=" + std::to_string(stamp.format_version) + "\n";
  s += "config_hash=" + stamp.config_hash + "\n";
  s += "seed=" + std::to_string(stamp.seed) + "\n";
  s += "det_rows=" + std::to_string(manifest.det_rows) + "\n";
  s += "det_cols=" + std::to_string(manifest.det_cols) + "\n";
  s += "label_norm_scope=" +
       std::string(manifest.label_scope == StatsScope::global ? "global" : "per_subject") + "\n";
  s += "label_global_mean=" + format_double(manifest.label_global.mean) + "\n";
  s += "label_global_std=" + format_double(manifest.label_global.std) + "\n";
  s += "subjects:\n";
  for (const auto& [id, st] : manifest.subjects) {
    s += id + " " + split_name(st.split) + " " + format_double(st.mr.mean) + " " +
         format_double(st.mr.std) + " " + format_double(st.label.mean) + " " +
         format_double(st.label.std) + "\n";
  }
  s += "samples:\n";
  for (const auto& ref : manifest.samples) {
    s += ref.subject_id + " " + std::to_string(ref.pose_index) + " " +
         format_double(ref.azimuth_deg) + " " + format_double(ref.inclination_deg) + " " +
         ref.input_path + " " + ref.label_path + " " + split_name(ref.split) + "\n";
  }
  return s;
}

DatasetManifest parse_dataset_manifest(const std::string& text) {
  DatasetManifest manifest;
  std::istringstream in(text);
  std::string line;
  enum { header, subjects, samples } section = header;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == "subjects:") {
      section = subjects;
      continue;
    }
    if (line == "samples:") {
      section = samples;
      continue;
    }
    if (section == header) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(0, eq);
      const std::string value = line.substr(eq + 1);
      if (key == "det_rows") manifest.det_rows = static_cast<int>(parse_long(value, key));
      else if (key == "det_cols") manifest.det_cols = static_cast<int>(parse_long(value, key));
      else if (key == "label_norm_scope") {
        manifest.label_scope = value == "global" ? StatsScope::global : StatsScope::per_subject;
      } else if (key == "label_global_mean") manifest.label_global.mean = parse_double(value, key);
      else if (key == "label_global_std") manifest.label_global.std = parse_double(value, key);
    } else if (section == subjects) {
      const auto parts = split(line, ' ');
      if (parts.size() != 6) throw IoError("bad subject row in dataset manifest: " + line);
      SubjectStats st;
      st.split = split_from_name(parts[1]);
      st.mr = {parse_double(parts[2], "mr_mean"), parse_double(parts[3], "mr_std"),
               StatsScope::per_subject};
      st.label = {parse_double(parts[4], "label_mean"), parse_double(parts[5], "label_std"),
                  StatsScope::per_subject};
      manifest.subjects[parts[0]] = st;
    } else {
      const auto parts = split(line, ' ');
      if (parts.size() != 7) throw IoError("bad sample row in dataset manifest: " + line);
      SampleRef ref;
      ref.subject_id = parts[0];
      ref.pose_index = static_cast<int>(parse_long(parts[1], "pose_index"));
      ref.azimuth_deg = parse_double(parts[2], "azimuth_deg");
      ref.inclination_deg = parse_double(parts[3], "inclination_deg");
      ref.input_path = parts[4];
      ref.label_path = parts[5];
      ref.split = split_from_name(parts[6]);
      manifest.samples.push_back(std::move(ref));
    }
  }
  manifest.label_global.scope = StatsScope::global;
  return manifest;
}

void save_dataset_manifest(const DatasetManifest& manifest, const std::string& dir,
                           const ArtifactStamp& stamp) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir);
  std::ofstream f(dir + "/manifest.txt");
  if (!f) throw IoError("cannot write " + dir + "/manifest.txt");
  f << serialize_dataset_manifest(manifest, stamp);

  // Sidecar stats files: one per subject plus the global label stats.
  for (const auto& [id, st] : manifest.subjects) {
    std::ofstream sf(dir + "/stats_" + id + ".txt");
    if (!sf) throw IoError("cannot write stats file for " + id);
    sf << "subject_id=" << id << "\n";
    sf << "mr_mean=" << format_double(st.mr.mean) << "\n";
    sf << "mr_std=" << format_double(st.mr.std) << "\n";
    sf << "label_mean=" << format_double(st.label.mean) << "\n";
    sf << "label_std=" << format_double(st.label.std) << "\n";
    sf << "scope=per_subject\n";
  }
  std::ofstream gf(dir + "/stats_label_global.txt");
  if (!gf) throw IoError("cannot write global label stats");
  gf << "label_mean=" << format_double(manifest.label_global.mean) << "\n";
  gf << "label_std=" << format_double(manifest.label_global.std) << "\n";
  gf << "scope=global\n";
}

DatasetManifest load_dataset_manifest(const std::string& dir) {
  std::ifstream f(dir + "/manifest.txt");
  if (!f) throw IoError("cannot open " + dir + "/manifest.txt");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_dataset_manifest(ss.str());
}

PairedSample load_sample(const DatasetManifest& manifest, const std::string& base_dir,
                         std::size_t sample_index) {
  if (sample_index >= manifest.samples.size()) {
    throw ArgumentError("load_sample: index out of range");
  }
  const SampleRef& ref = manifest.samples[sample_index];
  const auto subj = manifest.subjects.find(ref.subject_id);
  if (subj == manifest.subjects.end()) {
    throw ContractError("load_sample: unknown subject '" + ref.subject_id + "'");
  }

  ProjectionImage input = load_projection_image(base_dir + "/" + ref.input_path,
                                                manifest.det_rows, manifest.det_cols);
  ProjectionImage label = load_projection_image(base_dir + "/" + ref.label_path,
                                                manifest.det_rows, manifest.det_cols);

  PairedSample sample;
  sample.subject_id = ref.subject_id;
  sample.pose = ViewPose(ref.azimuth_deg, ref.inclination_deg);
  sample.rows = manifest.det_rows;
  sample.cols = manifest.det_cols;
  sample.label_raw = label.data;

  normalize(input.data, subj->second.mr);
  normalize(label.data, manifest.label_stats_for(ref.subject_id));

  sample.input = nn::Tensor({1, 1, sample.rows, sample.cols});
  sample.input.data = std::move(input.data);
  sample.label = nn::Tensor({1, 1, sample.rows, sample.cols});
  sample.label.data = std::move(label.data);
  return sample;
}

std::vector<std::size_t> sample_indices(const DatasetManifest& manifest, Split split) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    if (manifest.samples[i].split == split) out.push_back(i);
  }
  return out;
}

}  // namespace p2x
