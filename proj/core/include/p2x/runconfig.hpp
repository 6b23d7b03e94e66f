#pragma once

#include <map>
#include <string>
#include <vector>

#include "p2x/geometry.hpp"
#include "p2x/model.hpp"
#include "p2x/objective.hpp"
#include "p2x/phantom.hpp"
#include "p2x/trainer.hpp"

namespace p2x {

// Flat dotted-key configuration driving every pipeline stage. Files hold
// `key = value` lines; command-line overrides use the same key=value syntax.
class RunConfig {
 public:
  static RunConfig defaults();
  // Desk-scale preset used by the acceptance suite and the demo subcommand.
  static RunConfig demo();

  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& assignment);  // "key=value"

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  long get_long(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_list(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;

  // Sorted key=value serialization; its FNV-1a hash stamps every artifact.
  std::string canonical() const;
  std::string hash_hex() const;
  ArtifactStamp stamp() const;

  // Typed section extractors.
  std::uint64_t seed() const;
  ConeBeamGeometry geometry() const;
  HeadPhantomParams phantom_params() const;
  int phantom_subjects() const;
  int phantom_truncate_first_n() const;
  Trajectory train_trajectory() const;
  Trajectory test_trajectory() const;
  double projector_step_mm() const;
  std::vector<std::string> test_subjects() const;
  StatsScope label_scope() const;
  nn::ArchConfig arch() const;
  nn::DiscConfig disc_config() const;
  nn::FeatureNetConfig feature_config() const;
  nn::LossConfig loss_config() const;
  nn::TrainerConfig trainer_config() const;
  std::string output_dir() const;

  void save_file(const std::string& path) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace p2x
