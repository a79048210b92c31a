#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "tsact/model.hpp"
#include "tsact/optim.hpp"

namespace tsact {

struct Checkpoint {
  ModelSpec spec;
  ModelState state;
  std::optional<OptimizerState> optimizer;
  std::uint64_t seed = 0;
};

// Binary checkpoint layout (all integers little-endian):
//
//   8 bytes   magic "TSACKPT\0"
//   u32       format version (1)
//   u64       header length H
//   H bytes   JSON header: spec, seed, optimizer hyperparameters and step,
//             and a tensor table {name, shape, offset} into the payload
//   payload   float64 values of every tensor, back to back
//
// Readers reject unknown major versions.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tsact
