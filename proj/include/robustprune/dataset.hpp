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

#ifndef ROBUSTPRUNE_DATASET_HPP_
#define ROBUSTPRUNE_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "robustprune/tensor.hpp"

namespace robustprune {

enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Split split);

// Images [N, C, H, W] scaled to [0, 1] and one class index per image.
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  std::size_t num_classes = 10;
  Split split = Split::kTrain;

  std::size_t size() const { return labels.size(); }
  Shape example_shape() const;
  // Copies the listed examples, in order.
  Dataset subset(std::span<const std::size_t> indices) const;
};

// IDX image/label pair (big-endian magics 0x00000803 / 0x00000801). Files
// may be gzip-compressed; plain files are read as-is.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, std::size_t num_classes = 10);

// CIFAR-10 binary batches: 3073-byte records of one label byte followed by
// 1024 R, 1024 G and 1024 B bytes.
Dataset load_cifar_binary(const std::vector<std::filesystem::path>& paths);

// Reads a whole file, inflating it when gzip-compressed.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

// 90/10 partition: the last 10% of a seeded permutation becomes validation.
std::pair<Dataset, Dataset> split_train_val(const Dataset& train, std::uint64_t seed);

// ceil(fraction * n) with fractions that land within 1e-9 of an integer
// treated as exact.
std::size_t retained_count(std::size_t n, double fraction);

struct Batch {
  Tensor x;
  std::vector<int> y;
  // Positions in the source dataset.
  std::vector<std::size_t> ids;
};

// Deterministic minibatch schedule. A fixed subset (the first
// retained_count(N, fraction) entries of a permutation drawn from the seed)
// is reshuffled every epoch from (seed, epoch).
class BatchPlan {
 public:
  BatchPlan(const Dataset& data, std::size_t batch_size, std::uint64_t shuffle_seed,
            double fraction = 1.0);

  std::size_t retained() const { return subset_.size(); }
  std::size_t batch_size() const { return batch_size_; }
  std::size_t batches_per_epoch() const;
  const std::vector<std::size_t>& subset() const { return subset_; }

  std::vector<std::vector<std::size_t>> epoch(std::size_t index) const;
  Batch materialize(std::span<const std::size_t> ids) const;

 private:
  const Dataset* data_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::vector<std::size_t> subset_;
};

// Materializes examples [begin, end) of a dataset.
Batch slice_batch(const Dataset& data, std::size_t begin, std::size_t end);

// Fisher-Yates permutation of [0, n) from a seed.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

}  // namespace robustprune

#endif  // ROBUSTPRUNE_DATASET_HPP_
