#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "p2x/optim.hpp"
#include "p2x/volume.hpp"

namespace p2x::nn {

class CheckpointError : public ContractError {
 public:
  using ContractError::ContractError;
};

struct CheckpointData {
  std::uint64_t arch_hash = 0;
  ArtifactStamp stamp;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

// Magic "PTCKPT1": text index (name, shape, byte offset) followed by a raw
// f32le payload.
void save_checkpoint(const ParamStore& params, std::uint64_t arch_hash,
                     const ArtifactStamp& stamp, const std::string& path);

CheckpointData load_checkpoint(const std::string& path);

// Copies tensors into an existing store; names and shapes must match exactly.
void apply_checkpoint(ParamStore& params, const CheckpointData& data);

}  // namespace p2x::nn
