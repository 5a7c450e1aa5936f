// Copyright 2026 The Glyforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include "glyforge/encoder.hpp"
#include "glyforge/error.hpp"
#include "glyforge/io.hpp"
#include "glyforge/nn.hpp"
#include "glyforge/util.hpp"

namespace glyforge {

// Model container layout: an 8-byte magic, a little-endian u64 header
// length, a JSON header (model configuration, vocabulary lists with their
// content hashes, and a tensor manifest of name, dtype, shape and byte
// offset), then the raw little-endian tensor payloads in manifest order.
// Optimizer moments ride along under reserved "optim." names.
inline constexpr char kCheckpointMagic[8] = {'G', 'L', 'Y', 'A', 'A', '\0', '\0', '\1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian; big-endian hosts are unsupported");

struct CheckpointVocabs {
  std::vector<std::string> atoms;
  std::vector<std::string> monos;
  std::vector<std::string> linkages;
};

namespace detail {

template <class T>
const char* dtype_name() {
  if constexpr (std::is_same_v<T, float>) {
    return "f32";
  } else {
    static_assert(std::is_same_v<T, double>, "checkpoints hold f32 or f64 tensors");
    return "f64";
  }
}

inline std::string hash_hex(const std::vector<std::string>& items) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(items)));
  return std::string(buf);
}

template <class T>
void append_values(std::string& out, const std::vector<T>& values) {
  const std::size_t bytes = values.size() * sizeof(T);
  const std::size_t old = out.size();
  out.resize(old + bytes);
  std::memcpy(out.data() + old, values.data(), bytes);
}

}  // namespace detail

template <class T>
void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const CheckpointVocabs& vocabs, const Parameters<T>& params,
                     const Adam<T>* optimizer = nullptr) {
  nlohmann::json header;
  header["config"] = model_config_to_json(config);
  header["vocab"] = {{"atoms", vocabs.atoms},
                     {"atoms_hash", detail::hash_hex(vocabs.atoms)},
                     {"monos", vocabs.monos},
                     {"monos_hash", detail::hash_hex(vocabs.monos)},
                     {"linkages", vocabs.linkages},
                     {"linkages_hash", detail::hash_hex(vocabs.linkages)}};

  nlohmann::json manifest = nlohmann::json::array();
  std::string payload;
  auto add_entry = [&](const std::string& name, std::size_t rows, std::size_t cols,
                       bool trainable, const std::vector<T>& values) {
    manifest.push_back({{"name", name},
                        {"dtype", detail::dtype_name<T>()},
                        {"rows", rows},
                        {"cols", cols},
                        {"offset", payload.size()},
                        {"trainable", trainable}});
    detail::append_values(payload, values);
  };
  for (const auto& [name, tensor] : params) {
    add_entry(name, tensor.rows(), tensor.cols(), tensor.requires_grad(), tensor.values());
  }
  if (optimizer != nullptr) {
    header["optim"] = {{"step", optimizer->step_count()}};
    for (const auto& [name, state] : optimizer->state()) {
      const auto& tensor = params.at(name);
      add_entry("optim.m." + name, tensor.rows(), tensor.cols(), false, state.m);
      add_entry("optim.v." + name, tensor.rows(), tensor.cols(), false, state.v);
    }
  }
  header["manifest"] = manifest;

  const std::string header_text = header.dump();
  std::string blob;
  blob.reserve(8 + 8 + header_text.size() + payload.size());
  blob.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  const auto header_len = static_cast<std::uint64_t>(header_text.size());
  char len_bytes[8];
  std::memcpy(len_bytes, &header_len, sizeof(len_bytes));
  blob.append(len_bytes, sizeof(len_bytes));
  blob.append(header_text);
  blob.append(payload);
  write_file(path, blob);
}

template <class T>
struct LoadedCheckpoint {
  ModelConfig config;
  CheckpointVocabs vocabs;
  Parameters<T> params;
  bool has_optimizer = false;
  std::size_t optimizer_step = 0;
  std::map<std::string, std::vector<T>> optimizer_m;
  std::map<std::string, std::vector<T>> optimizer_v;
};

template <class T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
  const std::string blob = read_file(path);
  if (blob.size() < 16 || std::memcmp(blob.data(), kCheckpointMagic, 8) != 0) {
    throw DataError("not a model checkpoint: " + path);
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, blob.data() + 8, sizeof(header_len));
  if (blob.size() < 16 + header_len) {
    throw DataError("truncated checkpoint header: " + path);
  }
  const nlohmann::json header = parse_json(blob.substr(16, header_len), path);
  const std::size_t payload_start = 16 + header_len;

  LoadedCheckpoint<T> out;
  out.config = model_config_from_json(header.at("config"));
  const auto& vocab = header.at("vocab");
  out.vocabs.atoms = vocab.at("atoms").get<std::vector<std::string>>();
  out.vocabs.monos = vocab.at("monos").get<std::vector<std::string>>();
  out.vocabs.linkages = vocab.at("linkages").get<std::vector<std::string>>();
  if (detail::hash_hex(out.vocabs.atoms) != vocab.at("atoms_hash").get<std::string>() ||
      detail::hash_hex(out.vocabs.monos) != vocab.at("monos_hash").get<std::string>() ||
      detail::hash_hex(out.vocabs.linkages) != vocab.at("linkages_hash").get<std::string>()) {
    throw DataError("vocabulary hash mismatch; checkpoint is corrupt: " + path);
  }

  if (header.contains("optim")) {
    out.has_optimizer = true;
    out.optimizer_step = header.at("optim").at("step").get<std::size_t>();
  }
  for (const auto& entry : header.at("manifest")) {
    const auto name = entry.at("name").get<std::string>();
    const auto dtype = entry.at("dtype").get<std::string>();
    if (dtype != detail::dtype_name<T>()) {
      throw DataError("checkpoint tensor " + name + " has dtype " + dtype + ", expected " +
                      detail::dtype_name<T>());
    }
    const auto rows = entry.at("rows").get<std::size_t>();
    const auto cols = entry.at("cols").get<std::size_t>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const std::size_t bytes = rows * cols * sizeof(T);
    if (payload_start + offset + bytes > blob.size()) {
      throw DataError("truncated checkpoint payload at tensor " + name);
    }
    std::vector<T> values(rows * cols);
    std::memcpy(values.data(), blob.data() + payload_start + offset, bytes);
    if (name.rfind("optim.m.", 0) == 0) {
      out.optimizer_m.emplace(name.substr(8), std::move(values));
    } else if (name.rfind("optim.v.", 0) == 0) {
      out.optimizer_v.emplace(name.substr(8), std::move(values));
    } else {
      const bool trainable = entry.at("trainable").get<bool>();
      out.params.emplace(name, Tensor<T>::from(rows, cols, std::move(values), trainable));
    }
  }
  return out;
}

// Rebuilds an optimizer whose moment buffers continue where the checkpoint
// stopped. The parameter set must be the one loaded from the checkpoint.
template <class T>
Adam<T> restore_optimizer(const LoadedCheckpoint<T>& checkpoint, const AdamOptions<T>& options,
                          const Parameters<T>& params) {
  if (!checkpoint.has_optimizer) {
    throw DataError("checkpoint carries no optimizer state");
  }
  Adam<T> optimizer(options, params);
  auto& state = optimizer.mutable_state();
  for (auto& [name, slot] : state) {
    const auto m_it = checkpoint.optimizer_m.find(name);
    const auto v_it = checkpoint.optimizer_v.find(name);
    if (m_it == checkpoint.optimizer_m.end() || v_it == checkpoint.optimizer_v.end()) {
      throw DataError("checkpoint optimizer state is missing " + name);
    }
    if (m_it->second.size() != slot.m.size() || v_it->second.size() != slot.v.size()) {
      throw DataError("checkpoint optimizer state for " + name + " has the wrong size");
    }
    slot.m = m_it->second;
    slot.v = v_it->second;
  }
  optimizer.set_step_count(checkpoint.optimizer_step);
  return optimizer;
}

}  // namespace glyforge
