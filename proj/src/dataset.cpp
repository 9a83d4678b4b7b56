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

#include "robustprune/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "robustprune/errors.hpp"
#include "robustprune/rng.hpp"

namespace robustprune {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::size_t kCifarRecord = 3073;
constexpr std::size_t kCifarSide = 32;

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(path.string() + ": header truncated", bytes.size());
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void check_magic(const std::vector<std::uint8_t>& bytes, std::uint32_t expected,
                 const std::filesystem::path& path) {
  const std::uint32_t magic = read_be32(bytes, 0, path);
  if (magic != expected) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "bad IDX magic 0x%08x (expected 0x%08x)", magic, expected);
    throw FormatError(path.string() + ": " + buf, 0);
  }
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "unknown";
}

Shape Dataset::example_shape() const {
  const Shape& s = images.shape();
  return Shape(s.begin() + 1, s.end());
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw ConfigError("empty dataset subset");
  const Shape ex = example_shape();
  const std::size_t per = shape_numel(ex);
  Shape shape{indices.size()};
  shape.insert(shape.end(), ex.begin(), ex.end());
  Dataset out;
  out.images = Tensor(shape);
  out.labels.reserve(indices.size());
  out.num_classes = num_classes;
  out.split = split;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= size()) throw ConfigError("subset index out of range");
    std::copy_n(images.data() + i * per, per, out.images.data() + k * per);
    out.labels.push_back(labels[i]);
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw IoError("cannot open '" + path.string() + "': no such file");
  }
  // gzread passes non-gzip content through unchanged.
  std::unique_ptr<gzFile_s, decltype(&gzclose)> file(gzopen(path.string().c_str(), "rb"), &gzclose);
  if (!file) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes;
  std::uint8_t buf[1 << 16];
  for (;;) {
    const int n = gzread(file.get(), buf, sizeof(buf));
    if (n < 0) {
      int errnum = 0;
      const char* msg = gzerror(file.get(), &errnum);
      throw FormatError(path.string() + ": decompression failed: " + msg, bytes.size());
    }
    if (n == 0) break;
    bytes.insert(bytes.end(), buf, buf + n);
  }
  return bytes;
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, std::size_t num_classes) {
  const std::vector<std::uint8_t> img = read_file_bytes(images_path);
  const std::vector<std::uint8_t> lab = read_file_bytes(labels_path);
  check_magic(img, kIdxImagesMagic, images_path);
  check_magic(lab, kIdxLabelsMagic, labels_path);

  const std::size_t n = read_be32(img, 4, images_path);
  const std::size_t rows = read_be32(img, 8, images_path);
  const std::size_t cols = read_be32(img, 12, images_path);
  const std::size_t n_labels = read_be32(lab, 4, labels_path);
  if (n == 0 || rows == 0 || cols == 0) {
    throw FormatError(images_path.string() + ": zero-sized dimension in header", 4);
  }
  if (n != n_labels) {
    throw LengthError("image count " + std::to_string(n) + " differs from label count " +
                      std::to_string(n_labels));
  }
  const std::size_t pixels = n * rows * cols;
  if (img.size() < 16 + pixels) {
    throw LengthError(images_path.string() + ": payload truncated, expected " +
                      std::to_string(pixels) + " pixel bytes, found " +
                      std::to_string(img.size() - 16));
  }
  if (lab.size() < 8 + n) {
    throw LengthError(labels_path.string() + ": payload truncated, expected " + std::to_string(n) +
                      " label bytes, found " + std::to_string(lab.size() - 8));
  }

  Dataset out;
  out.num_classes = num_classes;
  out.images = Tensor({n, 1, rows, cols});
  for (std::size_t i = 0; i < pixels; ++i) out.images[i] = img[16 + i] / 255.0;
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = lab[8 + i];
    if (static_cast<std::size_t>(y) >= num_classes) {
      throw FormatError(labels_path.string() + ": label " + std::to_string(y) + " >= " +
                            std::to_string(num_classes),
                        8 + i);
    }
    out.labels[i] = y;
  }
  return out;
}

Dataset load_cifar_binary(const std::vector<std::filesystem::path>& paths) {
  if (paths.empty()) throw ConfigError("no CIFAR batch files given");
  std::vector<std::vector<std::uint8_t>> files;
  std::size_t n = 0;
  for (const auto& p : paths) {
    files.push_back(read_file_bytes(p));
    const std::size_t size = files.back().size();
    if (size == 0 || size % kCifarRecord != 0) {
      throw FormatError(p.string() + ": length " + std::to_string(size) +
                            " is not a positive multiple of " + std::to_string(kCifarRecord),
                        size - size % kCifarRecord);
    }
    n += size / kCifarRecord;
  }
  constexpr std::size_t pixels = 3 * kCifarSide * kCifarSide;
  Dataset out;
  out.num_classes = 10;
  out.images = Tensor({n, 3, kCifarSide, kCifarSide});
  out.labels.resize(n);
  std::size_t k = 0;
  for (std::size_t f = 0; f < files.size(); ++f) {
    const auto& bytes = files[f];
    for (std::size_t r = 0; r < bytes.size() / kCifarRecord; ++r, ++k) {
      const std::uint8_t* rec = bytes.data() + r * kCifarRecord;
      if (rec[0] >= 10) {
        throw FormatError(paths[f].string() + ": label " + std::to_string(rec[0]) + " >= 10",
                          r * kCifarRecord);
      }
      out.labels[k] = rec[0];
      double* dst = out.images.data() + k * pixels;
      for (std::size_t i = 0; i < pixels; ++i) dst[i] = rec[1 + i] / 255.0;
    }
  }
  return out;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& train, std::uint64_t seed) {
  const std::size_t n = train.size();
  if (n < 10) throw ConfigError("need at least 10 examples for a 90/10 split");
  const std::size_t n_val = (n + 5) / 10;
  const std::vector<std::size_t> perm =
      seeded_permutation(n, derive_seed(seed, {tag(StreamTag::kData), 0x5b1177}));
  std::span<const std::size_t> all(perm);
  Dataset tr = train.subset(all.first(n - n_val));
  Dataset va = train.subset(all.last(n_val));
  tr.split = Split::kTrain;
  va.split = Split::kVal;
  return {std::move(tr), std::move(va)};
}

std::size_t retained_count(std::size_t n, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw ConfigError("data fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  const double x = fraction * static_cast<double>(n);
  const double nearest = std::round(x);
  const double kept = std::fabs(x - nearest) <= 1e-9 * std::max(1.0, x) ? nearest : std::ceil(x);
  return std::clamp<std::size_t>(static_cast<std::size_t>(kept), 1, n);
}

BatchPlan::BatchPlan(const Dataset& data, std::size_t batch_size, std::uint64_t shuffle_seed,
                     double fraction)
    : data_(&data), batch_size_(batch_size), seed_(shuffle_seed) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (data.size() == 0) throw ConfigError("empty dataset");
  const std::size_t keep = retained_count(data.size(), fraction);
  subset_ = seeded_permutation(data.size(), derive_seed(seed_, {tag(StreamTag::kData), 0}));
  subset_.resize(keep);
}

std::size_t BatchPlan::batches_per_epoch() const {
  return (subset_.size() + batch_size_ - 1) / batch_size_;
}

std::vector<std::vector<std::size_t>> BatchPlan::epoch(std::size_t index) const {
  const std::vector<std::size_t> order =
      seeded_permutation(subset_.size(), derive_seed(seed_, {tag(StreamTag::kData), index + 1}));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size_) {
    std::vector<std::size_t> ids;
    for (std::size_t k = start; k < std::min(order.size(), start + batch_size_); ++k) {
      ids.push_back(subset_[order[k]]);
    }
    batches.push_back(std::move(ids));
  }
  return batches;
}

Batch BatchPlan::materialize(std::span<const std::size_t> ids) const {
  Dataset d = data_->subset(ids);
  return {std::move(d.images), std::move(d.labels), {ids.begin(), ids.end()}};
}

Batch slice_batch(const Dataset& data, std::size_t begin, std::size_t end) {
  if (begin >= end || end > data.size()) throw ConfigError("invalid batch slice");
  std::vector<std::size_t> ids(end - begin);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = begin + i;
  Dataset d = data.subset(ids);
  return {std::move(d.images), std::move(d.labels), std::move(ids)};
}

}  // namespace robustprune
