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

#include "robustprune/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "robustprune/errors.hpp"

namespace robustprune {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written in host order, which must be little-endian");

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'R', 'P', 'C', 'K'};
constexpr std::size_t kPreamble = 16;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& bytes, std::size_t offset) {
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

struct ArrayRef {
  std::string name;
  const Tensor* tensor;
};

}  // namespace

Checkpoint make_checkpoint(const Network& net, std::string stage) {
  Checkpoint c;
  c.architecture = net.architecture();
  c.input_shape = net.input_shape();
  c.num_classes = net.num_classes();
  c.stage = std::move(stage);
  for (const Tensor* p : net.parameters()) c.parameters.push_back(*p);
  for (const Layer& l : net.layers()) c.prunable.push_back(l.prunable);
  return c;
}

Network restore_network(const Checkpoint& ckpt) {
  Network net = build_architecture(ckpt.architecture, ckpt.input_shape, ckpt.num_classes);
  std::vector<Tensor*> params = net.parameters();
  if (params.size() != ckpt.parameters.size() || ckpt.prunable.size() != net.layers().size()) {
    throw FormatError("checkpoint does not match architecture '" + ckpt.architecture + "'", 0);
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->shape() != ckpt.parameters[k].shape()) {
      throw FormatError("checkpoint parameter " + std::to_string(k) + " has shape " +
                            shape_to_string(ckpt.parameters[k].shape()) + ", expected " +
                            shape_to_string(params[k]->shape()),
                        0);
    }
    *params[k] = ckpt.parameters[k];
  }
  for (std::size_t i = 0; i < net.layers().size(); ++i) net.layers()[i].prunable = ckpt.prunable[i];
  return net;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  std::vector<ArrayRef> arrays;
  for (std::size_t k = 0; k < c.parameters.size(); ++k) {
    arrays.push_back({"param/" + std::to_string(k), &c.parameters[k]});
  }
  json header = {
      {"architecture", c.architecture},
      {"input_shape", c.input_shape},
      {"num_classes", c.num_classes},
      {"stage", c.stage},
      {"seeds", {{"weights", c.seed_weights}, {"data", c.seed_data}, {"attack", c.seed_attack}}},
      {"config_digest", c.config_digest},
      {"prunable", c.prunable},
  };
  if (c.scores) {
    json layers = json::array();
    for (std::size_t i = 0; i < c.scores->layers.size(); ++i) {
      if (!c.scores->scored(i)) continue;
      layers.push_back(i);
      arrays.push_back({"scores/" + std::to_string(i), &c.scores->layers[i]});
    }
    header["scores"] = {{"granularity", to_string(c.scores->granularity)},
                        {"num_layers", c.scores->layers.size()},
                        {"layers", layers}};
  }
  if (c.mask) {
    json layers = json::array();
    for (std::size_t i = 0; i < c.mask->layers.size(); ++i) {
      if (!c.mask->covers(i)) continue;
      layers.push_back(i);
      arrays.push_back({"mask/" + std::to_string(i), &c.mask->layers[i]});
    }
    header["mask"] = {{"ratio", c.mask->ratio},
                      {"granularity", to_string(c.mask->granularity)},
                      {"num_layers", c.mask->layers.size()},
                      {"layers", layers}};
  }
  json list = json::array();
  for (const ArrayRef& a : arrays) list.push_back({{"name", a.name}, {"shape", a.tensor->shape()}});
  header["arrays"] = list;

  const std::string text = header.dump();
  std::string bytes(kMagic, sizeof(kMagic));
  put<std::uint32_t>(bytes, c.version);
  put<std::uint64_t>(bytes, text.size());
  bytes += text;
  for (const ArrayRef& a : arrays) {
    const std::size_t at = bytes.size();
    bytes.resize(at + a.tensor->numel() * sizeof(double));
    std::memcpy(bytes.data() + at, a.tensor->data(), a.tensor->numel() * sizeof(double));
  }

  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_digest,
                           std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.string();

  if (bytes.size() < kPreamble) throw FormatError(name + ": truncated preamble", bytes.size());
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(name + ": not a checkpoint (bad magic)", 0);
  }
  Checkpoint c;
  c.version = take<std::uint32_t>(bytes, 4);
  if (c.version != kCheckpointVersion) {
    throw FormatError(name + ": unsupported checkpoint version " + std::to_string(c.version), 4);
  }
  const auto header_len = take<std::uint64_t>(bytes, 8);
  if (header_len > bytes.size() - kPreamble) {
    throw FormatError(name + ": header runs past end of file", bytes.size());
  }
  json header;
  try {
    header = json::parse(bytes.begin() + kPreamble,
                         bytes.begin() + static_cast<std::ptrdiff_t>(kPreamble + header_len));
  } catch (const json::exception& e) {
    throw FormatError(name + ": malformed header: " + e.what(), kPreamble);
  }

  std::size_t offset = kPreamble + header_len;
  std::vector<std::pair<std::string, Tensor>> arrays;
  try {
    c.architecture = header.at("architecture").get<std::string>();
    c.input_shape = header.at("input_shape").get<Shape>();
    c.num_classes = header.at("num_classes").get<std::size_t>();
    c.stage = header.at("stage").get<std::string>();
    c.seed_weights = header.at("seeds").at("weights").get<std::uint64_t>();
    c.seed_data = header.at("seeds").at("data").get<std::uint64_t>();
    c.seed_attack = header.at("seeds").at("attack").get<std::uint64_t>();
    c.config_digest = header.at("config_digest").get<std::string>();
    c.prunable = header.at("prunable").get<std::vector<bool>>();
    for (const json& a : header.at("arrays")) {
      const Shape shape = a.at("shape").get<Shape>();
      const std::size_t n = shape_numel(shape);
      if (n > (bytes.size() - offset) / sizeof(double)) {
        throw FormatError(name + ": payload truncated in array '" +
                              a.at("name").get<std::string>() + "'",
                          bytes.size());
      }
      std::vector<double> data(n);
      std::memcpy(data.data(), bytes.data() + offset, n * sizeof(double));
      offset += n * sizeof(double);
      arrays.emplace_back(a.at("name").get<std::string>(), Tensor(shape, std::move(data)));
    }
  } catch (const json::exception& e) {
    throw FormatError(name + ": invalid header field: " + e.what(), kPreamble);
  } catch (const ShapeError& e) {
    throw FormatError(name + ": invalid array shape: " + e.what(), kPreamble);
  }
  if (offset != bytes.size()) {
    throw FormatError(name + ": " + std::to_string(bytes.size() - offset) +
                          " trailing bytes after payload",
                      offset);
  }

  std::size_t k = 0;
  const auto next = [&](const std::string& expected) -> Tensor& {
    if (k >= arrays.size() || arrays[k].first != expected) {
      throw FormatError(name + ": expected array '" + expected + "'", kPreamble);
    }
    return arrays[k++].second;
  };
  for (std::size_t p = 0; k < arrays.size() && arrays[k].first.rfind("param/", 0) == 0; ++p) {
    c.parameters.push_back(std::move(next("param/" + std::to_string(p))));
  }
  try {
    if (header.contains("scores")) {
      const json& s = header.at("scores");
      ImportanceScores scores;
      scores.granularity = parse_granularity(s.at("granularity").get<std::string>());
      scores.layers.resize(s.at("num_layers").get<std::size_t>());
      for (std::size_t i : s.at("layers").get<std::vector<std::size_t>>()) {
        if (i >= scores.layers.size()) throw FormatError(name + ": score layer out of range", 0);
        scores.layers[i] = std::move(next("scores/" + std::to_string(i)));
      }
      c.scores = std::move(scores);
    }
    if (header.contains("mask")) {
      const json& m = header.at("mask");
      PruneMask mask;
      mask.ratio = m.at("ratio").get<double>();
      mask.granularity = parse_granularity(m.at("granularity").get<std::string>());
      mask.layers.resize(m.at("num_layers").get<std::size_t>());
      for (std::size_t i : m.at("layers").get<std::vector<std::size_t>>()) {
        if (i >= mask.layers.size()) throw FormatError(name + ": mask layer out of range", 0);
        mask.layers[i] = std::move(next("mask/" + std::to_string(i)));
      }
      c.mask = std::move(mask);
    }
  } catch (const json::exception& e) {
    throw FormatError(name + ": invalid header field: " + e.what(), kPreamble);
  } catch (const ConfigError& e) {
    throw FormatError(name + ": " + e.what(), kPreamble);
  }
  if (k != arrays.size()) throw FormatError(name + ": unexpected array '" + arrays[k].first + "'", kPreamble);

  if (!expected_digest.empty() && c.config_digest != expected_digest && warnings) {
    warnings->push_back(name + ": config digest " + c.config_digest +
                        " differs from the current config (" + expected_digest + ")");
  }
  return c;
}

}  // namespace robustprune
