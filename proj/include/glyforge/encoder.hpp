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

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "glyforge/error.hpp"
#include "glyforge/nn.hpp"
#include "glyforge/rng.hpp"
#include "glyforge/structgraph.hpp"
#include "glyforge/tensor.hpp"

namespace glyforge {

// Three encoder wirings: the default runs bond, membership and linkage
// passes in sequence inside every block; single_pass folds all relations
// into one convolution over the combined node set; mono_only keeps just
// the linkage pass and leaves atom embeddings untouched.
enum class EncoderVariant { hierarchical, single_pass, mono_only };

// Graph readout pools either the residue rows alone or every node row.
enum class ReadoutScope { mono, all_node };

inline std::string to_string(EncoderVariant v) {
  switch (v) {
    case EncoderVariant::hierarchical: return "hierarchical";
    case EncoderVariant::single_pass: return "single_pass";
    case EncoderVariant::mono_only: return "mono_only";
  }
  throw ConfigError("unknown encoder variant");
}

inline std::string to_string(ReadoutScope s) {
  return s == ReadoutScope::mono ? "mono" : "all_node";
}

inline EncoderVariant encoder_variant_from_string(const std::string& s) {
  if (s == "hierarchical") return EncoderVariant::hierarchical;
  if (s == "single_pass") return EncoderVariant::single_pass;
  if (s == "mono_only") return EncoderVariant::mono_only;
  throw ConfigError("unknown encoder variant: " + s);
}

inline ReadoutScope readout_scope_from_string(const std::string& s) {
  if (s == "mono") return ReadoutScope::mono;
  if (s == "all_node") return ReadoutScope::all_node;
  throw ConfigError("unknown readout scope: " + s);
}

struct ModelConfig {
  int hidden_dim = 128;
  int num_blocks = 3;
  EncoderVariant variant = EncoderVariant::hierarchical;
  ReadoutScope readout = ReadoutScope::mono;
  // When set, both membership directions share one relation kernel.
  bool collapse_am_relations = false;
  int num_atom_types = 0;
  int num_mono_types = 0;
  int num_mm_relations = 0;

  int num_am_relations() const { return collapse_am_relations ? 1 : 2; }

  void validate() const {
    if (hidden_dim <= 0) throw ConfigError("hidden_dim must be positive");
    if (num_blocks < 1) throw ConfigError("num_blocks must be at least 1");
    if (num_atom_types < 1) throw ConfigError("num_atom_types must be at least 1");
    if (num_mono_types < 1) throw ConfigError("num_mono_types must be at least 1");
    if (num_mm_relations < 1) throw ConfigError("num_mm_relations must be at least 1");
  }
};

inline nlohmann::json model_config_to_json(const ModelConfig& config) {
  return {{"hidden_dim", config.hidden_dim},
          {"num_blocks", config.num_blocks},
          {"variant", to_string(config.variant)},
          {"readout", to_string(config.readout)},
          {"collapse_am_relations", config.collapse_am_relations},
          {"num_atom_types", config.num_atom_types},
          {"num_mono_types", config.num_mono_types},
          {"num_mm_relations", config.num_mm_relations}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig config;
  config.hidden_dim = j.at("hidden_dim").get<int>();
  config.num_blocks = j.at("num_blocks").get<int>();
  config.variant = encoder_variant_from_string(j.at("variant").get<std::string>());
  config.readout = readout_scope_from_string(j.at("readout").get<std::string>());
  config.collapse_am_relations = j.at("collapse_am_relations").get<bool>();
  config.num_atom_types = j.at("num_atom_types").get<int>();
  config.num_mono_types = j.at("num_mono_types").get<int>();
  config.num_mm_relations = j.at("num_mm_relations").get<int>();
  config.validate();
  return config;
}

// Edge lists of one convolution, bucketed per relation so the forward pass
// can aggregate each relation independently.
struct StageTopology {
  std::size_t num_nodes = 0;
  std::vector<std::vector<std::int32_t>> src;  // indexed [relation][edge]
  std::vector<std::vector<std::int32_t>> dst;

  std::size_t num_relations() const { return src.size(); }

  void resize(std::size_t nodes, std::size_t relations) {
    num_nodes = nodes;
    src.assign(relations, {});
    dst.assign(relations, {});
  }

  void add_edge(std::int32_t s, std::int32_t d, std::int32_t rel) {
    if (rel < 0 || static_cast<std::size_t>(rel) >= src.size()) {
      throw IndexError("relation id out of range: " + std::to_string(rel));
    }
    src[static_cast<std::size_t>(rel)].push_back(s);
    dst[static_cast<std::size_t>(rel)].push_back(d);
  }
};

// Precomputed edge buckets for every stage a variant may run. The
// membership stage works on the combined node set with atoms in rows
// [0, N) and residues in rows [N, N + M), which keeps atom indices stable
// across the three stages of a block.
struct EncoderTopology {
  std::size_t num_atoms = 0;
  std::size_t num_monos = 0;
  StageTopology aa;
  StageTopology am;
  StageTopology mm;
  StageTopology sp;  // populated for the single_pass variant only
};

inline EncoderTopology build_topology(const HeteroGlycanGraph& g, const ModelConfig& config) {
  config.validate();
  EncoderTopology topo;
  const std::size_t n = g.num_atoms();
  const std::size_t m = g.num_monos();
  topo.num_atoms = n;
  topo.num_monos = m;
  const auto base = static_cast<std::int32_t>(n);
  const auto num_am = static_cast<std::size_t>(config.num_am_relations());
  const auto am_rel = [&](std::int32_t rel) {
    return config.collapse_am_relations ? 0 : rel;
  };

  topo.aa.resize(n, kNumAaRelations);
  for (const auto& e : g.e_aa) topo.aa.add_edge(e.src, e.dst, e.rel);

  topo.am.resize(n + m, num_am);
  for (const auto& e : g.e_am) {
    if (e.rel == kRelAtomToMono) {
      topo.am.add_edge(e.src, base + e.dst, am_rel(e.rel));
    } else {
      topo.am.add_edge(base + e.src, e.dst, am_rel(e.rel));
    }
  }

  topo.mm.resize(m, static_cast<std::size_t>(config.num_mm_relations));
  for (const auto& e : g.e_mm) topo.mm.add_edge(e.src, e.dst, e.rel);

  if (config.variant == EncoderVariant::single_pass) {
    const auto aa_count = static_cast<std::int32_t>(kNumAaRelations);
    const auto am_count = static_cast<std::int32_t>(num_am);
    topo.sp.resize(n + m, kNumAaRelations + num_am +
                              static_cast<std::size_t>(config.num_mm_relations));
    for (const auto& e : g.e_aa) topo.sp.add_edge(e.src, e.dst, e.rel);
    for (const auto& e : g.e_am) {
      if (e.rel == kRelAtomToMono) {
        topo.sp.add_edge(e.src, base + e.dst, aa_count + am_rel(e.rel));
      } else {
        topo.sp.add_edge(base + e.src, e.dst, aa_count + am_rel(e.rel));
      }
    }
    for (const auto& e : g.e_mm) {
      topo.sp.add_edge(base + e.src, base + e.dst, aa_count + am_count + e.rel);
    }
  }
  return topo;
}

// One relational convolution: each node keeps a linear self-update and adds
// the rectified, batch-normalized sum over relations of the per-relation
// mean of linearly transformed in-neighbors. Nodes without in-edges still
// receive the rectified normalization of a zero aggregate.
template <class T>
Tensor<T> rgconv(const Tensor<T>& z, const StageTopology& topo, Parameters<T>& params,
                 const std::string& prefix, bool training) {
  if (z.rows() != topo.num_nodes) {
    throw ShapeError("rgconv input rows do not match the stage node count");
  }
  const std::size_t d = z.cols();
  Tensor<T> self_term = matmul(z, params.at(prefix + ".W_self"));
  std::vector<Tensor<T>> terms;
  terms.reserve(topo.num_relations());
  for (std::size_t r = 0; r < topo.num_relations(); ++r) {
    if (topo.src[r].empty()) continue;
    Tensor<T> messages = gather_rows(z, topo.src[r]);
    Tensor<T> pooled = segment_mean(messages, topo.dst[r], topo.num_nodes);
    terms.push_back(matmul(pooled, params.at(prefix + ".W_r." + std::to_string(r))));
  }
  Tensor<T> aggregate;
  if (terms.empty()) {
    aggregate = Tensor<T>::zeros(topo.num_nodes, d);
  } else if (terms.size() == 1) {
    aggregate = terms.front();
  } else {
    aggregate = add_many(std::span<const Tensor<T>>(terms));
  }
  Tensor<T> normed =
      batch_norm(aggregate, params.at(prefix + ".bn.gamma"), params.at(prefix + ".bn.beta"),
                 params.at(prefix + ".bn.running_mean"), params.at(prefix + ".bn.running_var"),
                 training);
  return add(self_term, relu(normed));
}

// One hierarchical block: bond-level pass over atoms, membership pass over
// the combined node set, linkage pass over residues.
template <class T>
std::pair<Tensor<T>, Tensor<T>> block_forward(const Tensor<T>& z_atoms, const Tensor<T>& z_monos,
                                              const EncoderTopology& topo, Parameters<T>& params,
                                              const std::string& block_prefix, bool training) {
  const std::size_t n = topo.num_atoms;
  const std::size_t m = topo.num_monos;
  Tensor<T> atoms_after_aa = rgconv(z_atoms, topo.aa, params, block_prefix + ".aa", training);
  Tensor<T> combined = concat_rows(atoms_after_aa, z_monos);
  Tensor<T> combined_after_am = rgconv(combined, topo.am, params, block_prefix + ".am", training);
  Tensor<T> atoms_out = slice_rows(combined_after_am, 0, n);
  Tensor<T> monos_mid = slice_rows(combined_after_am, n, n + m);
  Tensor<T> monos_out = rgconv(monos_mid, topo.mm, params, block_prefix + ".mm", training);
  return {std::move(atoms_out), std::move(monos_out)};
}

template <class T>
struct EncodeResult {
  Tensor<T> atom_repr;   // N x d
  Tensor<T> mono_repr;   // M x d
  Tensor<T> graph_repr;  // B x 2d
};

// Pools each graph of the batch into a row: columnwise mean and columnwise
// max of its node rows, concatenated.
template <class T>
Tensor<T> readout(const Tensor<T>& rows, const std::vector<std::int32_t>& graph_of_row,
                  std::size_t num_graphs) {
  if (rows.rows() == 0) throw ShapeError("readout requires at least one node row");
  Tensor<T> mean_part = segment_mean(rows, graph_of_row, num_graphs);
  Tensor<T> max_part = segment_max(rows, graph_of_row, num_graphs);
  return concat_cols(mean_part, max_part);
}

// Full encoder over a merged batch: embedding lookup, num_blocks rounds of
// message passing in the configured wiring, then per-graph readout.
template <class T>
EncodeResult<T> encode(const GraphBatch& batch, Parameters<T>& params, const ModelConfig& config,
                       bool training) {
  config.validate();
  const HeteroGlycanGraph& g = batch.merged;
  if (g.num_monos() == 0) throw ShapeError("cannot encode an empty batch");
  const EncoderTopology topo = build_topology(g, config);
  const std::size_t n = topo.num_atoms;
  const std::size_t m = topo.num_monos;

  Tensor<T> z_atoms = gather_rows(params.at("embed.atom"), g.atom_types);
  Tensor<T> z_monos = gather_rows(params.at("embed.mono"), g.mono_types);

  for (int b = 0; b < config.num_blocks; ++b) {
    const std::string block_prefix = "block" + std::to_string(b);
    switch (config.variant) {
      case EncoderVariant::hierarchical: {
        auto [atoms_out, monos_out] =
            block_forward(z_atoms, z_monos, topo, params, block_prefix, training);
        z_atoms = std::move(atoms_out);
        z_monos = std::move(monos_out);
        break;
      }
      case EncoderVariant::single_pass: {
        Tensor<T> combined = concat_rows(z_atoms, z_monos);
        Tensor<T> updated = rgconv(combined, topo.sp, params, block_prefix + ".sp", training);
        z_atoms = slice_rows(updated, 0, n);
        z_monos = slice_rows(updated, n, n + m);
        break;
      }
      case EncoderVariant::mono_only: {
        z_monos = rgconv(z_monos, topo.mm, params, block_prefix + ".mm", training);
        break;
      }
    }
  }

  EncodeResult<T> result;
  const auto num_graphs = static_cast<std::size_t>(batch.num_graphs);
  if (config.readout == ReadoutScope::mono) {
    result.graph_repr = readout(z_monos, batch.mono_graph, num_graphs);
  } else {
    Tensor<T> all_rows = concat_rows(z_atoms, z_monos);
    std::vector<std::int32_t> graph_of_row = batch.atom_graph;
    graph_of_row.insert(graph_of_row.end(), batch.mono_graph.begin(), batch.mono_graph.end());
    result.graph_repr = readout(all_rows, graph_of_row, num_graphs);
  }
  result.atom_repr = std::move(z_atoms);
  result.mono_repr = std::move(z_monos);
  return result;
}

template <class T>
EncodeResult<T> encode(const HeteroGlycanGraph& g, Parameters<T>& params,
                       const ModelConfig& config, bool training) {
  const HeteroGlycanGraph* ptr = &g;
  GraphBatch batch = batch_graphs(std::span<const HeteroGlycanGraph* const>(&ptr, 1));
  return encode(batch, params, config, training);
}

namespace detail {

template <class T>
void add_stage_params(Parameters<T>& params, const std::string& prefix, std::size_t d,
                      std::size_t num_relations, Rng& rng) {
  params.emplace(prefix + ".W_self", uniform_init<T>(d, d, rng));
  for (std::size_t r = 0; r < num_relations; ++r) {
    params.emplace(prefix + ".W_r." + std::to_string(r), uniform_init<T>(d, d, rng));
  }
  add_batch_norm_params(params, prefix, d);
}

}  // namespace detail

// Fresh encoder parameters: embedding codebooks drawn from a unit normal,
// square kernels from the fan-in uniform window, one batch norm per stage.
template <class T>
Parameters<T> init_encoder_params(const ModelConfig& config, Rng& rng) {
  config.validate();
  const auto d = static_cast<std::size_t>(config.hidden_dim);
  Parameters<T> params;
  params.emplace("embed.atom",
                 normal_init<T>(static_cast<std::size_t>(config.num_atom_types), d, rng));
  params.emplace("embed.mono",
                 normal_init<T>(static_cast<std::size_t>(config.num_mono_types), d, rng));
  const auto num_am = static_cast<std::size_t>(config.num_am_relations());
  const auto num_mm = static_cast<std::size_t>(config.num_mm_relations);
  for (int b = 0; b < config.num_blocks; ++b) {
    const std::string block_prefix = "block" + std::to_string(b);
    switch (config.variant) {
      case EncoderVariant::hierarchical:
        detail::add_stage_params(params, block_prefix + ".aa", d, kNumAaRelations, rng);
        detail::add_stage_params(params, block_prefix + ".am", d, num_am, rng);
        detail::add_stage_params(params, block_prefix + ".mm", d, num_mm, rng);
        break;
      case EncoderVariant::single_pass:
        detail::add_stage_params(params, block_prefix + ".sp", d,
                                 kNumAaRelations + num_am + num_mm, rng);
        break;
      case EncoderVariant::mono_only:
        detail::add_stage_params(params, block_prefix + ".mm", d, num_mm, rng);
        break;
    }
  }
  return params;
}

}  // namespace glyforge
