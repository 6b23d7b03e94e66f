#include "p2x/checkpoint.hpp"

#include <fstream>

namespace p2x::nn {

void save_checkpoint(const ParamStore& params, std::uint64_t arch_hash,
                     const ArtifactStamp& stamp, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << "PTCKPT1\n";
  f << "format_version=" << stamp.format_version << "\n";
  f << "config_hash=" << stamp.config_hash << "\n";
  f << "seed=" << stamp.seed << "\n";
  f << "arch_hash=" << to_hex(arch_hash) << "\n";
  f << "tensor_count=" << params.items().size() << "\n";
  std::size_t offset = 0;
  for (const auto& [name, var] : params.items()) {
    const Shape& s = var->value.shape;
    f << name << " " << s.n << " " << s.c << " " << s.h << " " << s.w << " " << offset << "\n";
    offset += var->value.data.size() * sizeof(float);
  }
  f << "payload\n";
  for (const auto& [name, var] : params.items()) {
    f.write(reinterpret_cast<const char*>(var->value.data.data()),
            static_cast<std::streamsize>(var->value.data.size() * sizeof(float)));
  }
  if (!f) throw IoError("short write to " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != "PTCKPT1") {
    throw CheckpointError("bad checkpoint magic in " + path);
  }
  CheckpointData data;
  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  std::vector<Entry> entries;
  std::size_t tensor_count = 0;
  while (std::getline(f, line)) {
    if (line == "payload") break;
    const auto eq = line.find('=');
    if (eq != std::string::npos) {
      const std::string key = line.substr(0, eq);
      const std::string value = line.substr(eq + 1);
      if (key == "arch_hash") {
        data.arch_hash = std::stoull(value, nullptr, 16);
      } else if (key == "config_hash") {
        data.stamp.config_hash = value;
      } else if (key == "seed") {
        data.stamp.seed = static_cast<std::uint64_t>(parse_long(value, key));
      } else if (key == "format_version") {
        data.stamp.format_version = static_cast<int>(parse_long(value, key));
      } else if (key == "tensor_count") {
        tensor_count = static_cast<std::size_t>(parse_long(value, key));
      }
      continue;
    }
    const auto parts = split(line, ' ');
    if (parts.size() != 6) throw CheckpointError("bad index row in " + path);
    Entry e;
    e.name = parts[0];
    e.shape = {static_cast<int>(parse_long(parts[1], "n")), static_cast<int>(parse_long(parts[2], "c")),
               static_cast<int>(parse_long(parts[3], "h")), static_cast<int>(parse_long(parts[4], "w"))};
    e.offset = static_cast<std::size_t>(parse_long(parts[5], "offset"));
    entries.push_back(std::move(e));
  }
  if (entries.size() != tensor_count) throw CheckpointError("index size mismatch in " + path);

  const std::streampos payload_start = f.tellg();
  for (const auto& e : entries) {
    Tensor t(e.shape);
    f.seekg(payload_start + static_cast<std::streamoff>(e.offset));
    f.read(reinterpret_cast<char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (f.gcount() != static_cast<std::streamsize>(t.data.size() * sizeof(float))) {
      throw CheckpointError("truncated payload in " + path);
    }
    data.tensors.emplace_back(e.name, std::move(t));
  }
  return data;
}

void apply_checkpoint(ParamStore& params, const CheckpointData& data) {
  if (data.tensors.size() != params.items().size()) {
    throw CheckpointError("checkpoint tensor count does not match the parameter store");
  }
  for (const auto& [name, tensor] : data.tensors) {
    auto var = params.find(name);
    if (!var) throw CheckpointError("checkpoint tensor '" + name + "' missing from store");
    if (!(var->value.shape == tensor.shape)) {
      throw CheckpointError("checkpoint tensor '" + name + "' has mismatched shape");
    }
    var->value = tensor;
  }
}

}  // namespace p2x::nn
