#include "p2x/runconfig.hpp"

#include <fstream>

namespace p2x {

RunConfig RunConfig::defaults() {
  RunConfig c;
  auto& v = c.values_;
  v["seed"] = "1234";
  v["threads"] = "0";
  v["output_dir"] = "out";

  v["phantom.n_subjects"] = "13";
  v["phantom.dims"] = "128,128,128";
  v["phantom.spacing_mm"] = "1.5,1.5,1.5";
  v["phantom.skull_thickness_mm"] = "6";
  v["phantom.n_sinus_cavities"] = "3";
  v["phantom.n_vessels"] = "6";
  v["phantom.jitter"] = "0.08";
  v["phantom.truncate_axial_fraction"] = "0";
  v["phantom.truncate_first_n"] = "0";

  v["geometry.sad_mm"] = "785";
  v["geometry.sdd_mm"] = "1200";
  v["geometry.det_rows"] = "256";
  v["geometry.det_cols"] = "256";
  v["geometry.det_spacing_mm"] = "1.2";
  v["geometry.beam_mode"] = "cone";

  v["trajectory.train_azimuth"] = "30";
  v["trajectory.train_inclination"] = "15";
  // Inclination half-range of the training distribution; the clinical value
  // is not published, so this stays configuration.
  v["trajectory.train_incl_range_deg"] = "20";
  v["trajectory.test_views"] = "360";

  v["projector.step_rel"] = "0.5";  // fraction of the minimum voxel spacing

  v["dataset.test_subjects"] = "s11,s12";
  v["dataset.label_norm_scope"] = "global";

  v["arch.preset"] = "proposed";
  v["arch.levels"] = "3";
  v["arch.channels"] = "";   // custom preset only
  v["arch.resblocks"] = "";
  v["arch.final_activation"] = "linear";

  v["disc.base_channels"] = "16";

  v["featurenet.stages"] = "4";
  v["featurenet.channels"] = "16,32,64,64";
  v["featurenet.seed"] = "77";

  v["loss.edge_weighting"] = "true";
  v["loss.edge_threshold"] = "0.4";
  v["loss.baseline_weight"] = "0.1";
  v["loss.binarize"] = "false";
  v["loss.fm_stage_weights"] = "1,1,1,1";
  v["loss.gan_weight"] = "1";

  v["trainer.epochs"] = "300";
  v["trainer.max_iterations"] = "0";
  v["trainer.lr"] = "1e-4";
  v["trainer.checkpoint_every"] = "50";
  v["trainer.shuffle"] = "true";

  v["bench.repetitions"] = "100";
  v["bench.warmup"] = "10";
  return c;
}

RunConfig RunConfig::demo() {
  RunConfig c = defaults();
  c.set("phantom.n_subjects", "5");
  c.set("phantom.dims", "96,96,96");
  c.set("phantom.spacing_mm", "2,2,2");
  c.set("geometry.det_rows", "64");
  c.set("geometry.det_cols", "64");
  c.set("geometry.det_spacing_mm", "4.5");
  c.set("trajectory.train_azimuth", "4");
  c.set("trajectory.train_inclination", "1");
  c.set("trajectory.train_incl_range_deg", "0");
  c.set("trajectory.test_views", "16");
  c.set("dataset.test_subjects", "s04");
  c.set("trainer.epochs", "20");
  c.set("trainer.max_iterations", "200");
  c.set("trainer.lr", "1e-3");
  c.set("loss.fm_stage_weights", "10,10,10,10");
  return c;
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ArgumentError("config " + path + ":" + std::to_string(line_no) +
                          ": expected key = value");
    }
    set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ArgumentError("unknown config key '" + key + "'");
  it->second = value;
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ArgumentError("override '" + assignment + "' must have the form key=value");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ArgumentError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  return parse_double(get(key), key);
}

long RunConfig::get_long(const std::string& key) const { return parse_long(get(key), key); }

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ArgumentError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<double> RunConfig::get_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& part : split(get(key), ',')) {
    const std::string p = trim(part);
    if (!p.empty()) out.push_back(parse_double(p, key));
  }
  return out;
}

std::vector<std::string> RunConfig::get_strings(const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& part : split(get(key), ',')) {
    const std::string p = trim(part);
    if (!p.empty()) out.push_back(p);
  }
  return out;
}

std::string RunConfig::canonical() const {
  std::string s;
  for (const auto& [key, value] : values_) s += key + "=" + value + "\n";
  return s;
}

std::string RunConfig::hash_hex() const { return to_hex(fnv1a64(canonical())); }

ArtifactStamp RunConfig::stamp() const {
  ArtifactStamp st;
  st.config_hash = hash_hex();
  st.seed = seed();
  st.format_version = 1;
  return st;
}

std::uint64_t RunConfig::seed() const { return static_cast<std::uint64_t>(get_long("seed")); }

ConeBeamGeometry RunConfig::geometry() const {
  ConeBeamGeometry g;
  g.sad_mm = get_double("geometry.sad_mm");
  g.sdd_mm = get_double("geometry.sdd_mm");
  g.det_rows = static_cast<int>(get_long("geometry.det_rows"));
  g.det_cols = static_cast<int>(get_long("geometry.det_cols"));
  g.det_spacing_mm = get_double("geometry.det_spacing_mm");
  g.beam_mode = beam_mode_from_name(get("geometry.beam_mode"));
  g.validate();
  return g;
}

HeadPhantomParams RunConfig::phantom_params() const {
  HeadPhantomParams p;
  p.seed = seed();
  const auto dims = get_list("phantom.dims");
  const auto sp = get_list("phantom.spacing_mm");
  if (dims.size() != 3 || sp.size() != 3) {
    throw ArgumentError("phantom.dims and phantom.spacing_mm need 3 entries");
  }
  for (int a = 0; a < 3; ++a) {
    p.dims[a] = static_cast<int>(dims[a]);
    p.spacing_mm[a] = sp[a];
  }
  p.skull_thickness_mm = get_double("phantom.skull_thickness_mm");
  p.n_sinus_cavities = static_cast<int>(get_long("phantom.n_sinus_cavities"));
  p.n_vessels = static_cast<int>(get_long("phantom.n_vessels"));
  p.jitter = get_double("phantom.jitter");
  p.truncate_axial_fraction = get_double("phantom.truncate_axial_fraction");
  return p;
}

int RunConfig::phantom_subjects() const {
  return static_cast<int>(get_long("phantom.n_subjects"));
}

int RunConfig::phantom_truncate_first_n() const {
  return static_cast<int>(get_long("phantom.truncate_first_n"));
}

Trajectory RunConfig::train_trajectory() const {
  return make_training_trajectory(static_cast<int>(get_long("trajectory.train_azimuth")),
                                  static_cast<int>(get_long("trajectory.train_inclination")),
                                  get_double("trajectory.train_incl_range_deg"));
}

Trajectory RunConfig::test_trajectory() const {
  return make_test_trajectory(static_cast<int>(get_long("trajectory.test_views")));
}

double RunConfig::projector_step_mm() const {
  const auto sp = get_list("phantom.spacing_mm");
  const double min_sp = std::min({sp[0], sp[1], sp[2]});
  return get_double("projector.step_rel") * min_sp;
}

std::vector<std::string> RunConfig::test_subjects() const {
  return get_strings("dataset.test_subjects");
}

StatsScope RunConfig::label_scope() const {
  const std::string& v = get("dataset.label_norm_scope");
  if (v == "global") return StatsScope::global;
  if (v == "per_subject") return StatsScope::per_subject;
  throw ArgumentError("dataset.label_norm_scope must be global or per_subject");
}

nn::ArchConfig RunConfig::arch() const {
  const std::string& preset = get("arch.preset");
  nn::ArchConfig cfg;
  if (preset == "custom") {
    cfg.levels = static_cast<int>(get_long("arch.levels"));
    for (double c : get_list("arch.channels")) cfg.channels.push_back(static_cast<int>(c));
    for (double r : get_list("arch.resblocks")) cfg.resblocks.push_back(static_cast<int>(r));
  } else {
    cfg = nn::make_generator_preset(nn::preset_from_name(preset));
  }
  cfg.final_activation = get("arch.final_activation") == "tanh" ? nn::FinalActivation::tanh
                                                                : nn::FinalActivation::linear;
  cfg.validate();
  return cfg;
}

nn::DiscConfig RunConfig::disc_config() const {
  nn::DiscConfig cfg;
  cfg.base_channels = static_cast<int>(get_long("disc.base_channels"));
  cfg.validate();
  return cfg;
}

nn::FeatureNetConfig RunConfig::feature_config() const {
  nn::FeatureNetConfig cfg;
  cfg.stages = static_cast<int>(get_long("featurenet.stages"));
  cfg.channels.clear();
  for (double c : get_list("featurenet.channels")) cfg.channels.push_back(static_cast<int>(c));
  cfg.seed = static_cast<std::uint64_t>(get_long("featurenet.seed"));
  cfg.validate();
  return cfg;
}

nn::LossConfig RunConfig::loss_config() const {
  nn::LossConfig cfg;
  cfg.edge_weighting = get_bool("loss.edge_weighting");
  cfg.edge_threshold = get_double("loss.edge_threshold");
  cfg.baseline_weight = get_double("loss.baseline_weight");
  cfg.binarize = get_bool("loss.binarize");
  cfg.fm_stage_weights = get_list("loss.fm_stage_weights");
  cfg.gan_weight = get_double("loss.gan_weight");
  if (cfg.edge_threshold < 0.0 || cfg.edge_threshold > 1.0) {
    throw ArgumentError("loss.edge_threshold must lie in [0, 1]");
  }
  if (cfg.baseline_weight < 0.0) throw ArgumentError("loss.baseline_weight must be >= 0");
  return cfg;
}

nn::TrainerConfig RunConfig::trainer_config() const {
  nn::TrainerConfig cfg;
  cfg.epochs = static_cast<int>(get_long("trainer.epochs"));
  cfg.max_iterations = get_long("trainer.max_iterations");
  cfg.lr = get_double("trainer.lr");
  cfg.checkpoint_every = static_cast<int>(get_long("trainer.checkpoint_every"));
  cfg.shuffle = get_bool("trainer.shuffle");
  cfg.seed = seed();
  return cfg;
}

std::string RunConfig::output_dir() const { return get("output_dir"); }

void RunConfig::save_file(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write config file " + path);
  f << canonical();
}

}  // namespace p2x
