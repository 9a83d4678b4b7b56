// Copyright 2026 The robustprune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Binary checkpoints.
//
//   offset 0   "RPCK"
//   offset 4   u32 format version (little-endian)
//   offset 8   u64 header length H (little-endian)
//   offset 16  H bytes of UTF-8 JSON header
//   offset 16+H  payload: every array listed in header["arrays"], in order,
//                as little-endian IEEE-754 binary64
//
// The file must end exactly after the last array.

#ifndef ROBUSTPRUNE_CHECKPOINT_HPP_
#define ROBUSTPRUNE_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "robustprune/network.hpp"
#include "robustprune/pruning.hpp"

namespace robustprune {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string architecture;
  Shape input_shape;
  std::size_t num_classes = 10;
  // Stage that produced the checkpoint: pretrain, prune, finetune.
  std::string stage;
  std::uint64_t seed_weights = 0;
  std::uint64_t seed_data = 0;
  std::uint64_t seed_attack = 0;
  std::string config_digest;
  // Per parametric layer, in Network::parameters() order.
  std::vector<Tensor> parameters;
  std::vector<bool> prunable;
  std::optional<ImportanceScores> scores;
  std::optional<PruneMask> mask;
};

// Captures the parameters and prunable flags of `net`.
Checkpoint make_checkpoint(const Network& net, std::string stage);

// Rebuilds the network the checkpoint describes.
Network restore_network(const Checkpoint& ckpt);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

// Throws IoError when unreadable and FormatError (with byte offset) when
// corrupt or truncated. A digest different from `expected_digest` is not an
// error; it is reported through `warnings`.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::string& expected_digest = {},
                           std::vector<std::string>* warnings = nullptr);

}  // namespace robustprune

#endif  // ROBUSTPRUNE_CHECKPOINT_HPP_
