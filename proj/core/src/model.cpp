#include "p2x/model.hpp"

namespace p2x::nn {

void ArchConfig::validate() const {
  if (levels < 2) throw ArgumentError("arch: levels must be >= 2");
  if (channels.size() != static_cast<std::size_t>(levels) ||
      resblocks.size() != static_cast<std::size_t>(levels)) {
    throw ArgumentError("arch: channels and resblocks need exactly one entry per level");
  }
  for (int c : channels) {
    if (c < 1) throw ArgumentError("arch: channel widths must be >= 1");
  }
  for (int r : resblocks) {
    if (r < 0) throw ArgumentError("arch: residual block counts must be >= 0");
  }
  if (stem_kernel < 1 || stem_kernel % 2 == 0) throw ArgumentError("arch: stem_kernel must be odd");
  if (res_kernel < 1 || res_kernel % 2 == 0) throw ArgumentError("arch: res_kernel must be odd");
  if (down_kernel < 2 || down_kernel % 2 == 0) throw ArgumentError("arch: down_kernel must be odd");
  if (up_kernel < 2 || up_kernel % 2 != 0) throw ArgumentError("arch: up_kernel must be even");
}

std::string ArchConfig::canonical() const {
  std::string s = "levels=" + std::to_string(levels) + ";channels=";
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(channels[i]);
  }
  s += ";resblocks=";
  for (std::size_t i = 0; i < resblocks.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(resblocks[i]);
  }
  s += ";kernels=" + std::to_string(stem_kernel) + "," + std::to_string(down_kernel) + "," +
       std::to_string(up_kernel) + "," + std::to_string(res_kernel);
  s += ";final=" + std::string(final_activation == FinalActivation::tanh ? "tanh" : "linear");
  return s;
}

GeneratorPresetName preset_from_name(std::string_view name) {
  if (name == "reference") return GeneratorPresetName::reference;
  if (name == "proposed") return GeneratorPresetName::proposed;
  throw ArgumentError("unknown generator preset '" + std::string(name) + "'");
}

std::string preset_name(GeneratorPresetName p) {
  return p == GeneratorPresetName::reference ? "reference" : "proposed";
}

ArchConfig make_generator_preset(GeneratorPresetName p) {
  ArchConfig cfg;
  cfg.levels = 3;
  if (p == GeneratorPresetName::reference) {
    cfg.channels = {12, 24, 32};
    cfg.resblocks = {0, 0, 3};
  } else {
    cfg.channels = {12, 24, 24};
    cfg.resblocks = {2, 5, 0};
  }
  return cfg;
}

void DiscConfig::validate() const {
  if (base_channels < 1) throw ArgumentError("disc: base_channels must be >= 1");
  if (n_stride2 < 1) throw ArgumentError("disc: n_stride2 must be >= 1");
  if (kernel < 2) throw ArgumentError("disc: kernel must be >= 2");
  if (!(slope > 0.0 && slope < 1.0)) throw ArgumentError("disc: slope must lie in (0, 1)");
}

std::string DiscConfig::canonical() const {
  return "base=" + std::to_string(base_channels) + ";s2=" + std::to_string(n_stride2) +
         ";k=" + std::to_string(kernel) + ";slope=" + format_double(slope);
}

void FeatureNetConfig::validate() const {
  if (stages < 2) throw ArgumentError("feature net: stages must be >= 2");
  if (channels.size() != static_cast<std::size_t>(stages)) {
    throw ArgumentError("feature net: channels needs exactly one entry per stage");
  }
  for (int c : channels) {
    if (c < 1) throw ArgumentError("feature net: channel widths must be >= 1");
  }
}

std::string FeatureNetConfig::canonical() const {
  std::string s = "stages=" + std::to_string(stages) + ";channels=";
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(channels[i]);
  }
  s += ";seed=" + std::to_string(seed);
  return s;
}

}  // namespace p2x::nn
