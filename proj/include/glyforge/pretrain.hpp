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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glyforge/encoder.hpp"
#include "glyforge/error.hpp"
#include "glyforge/io.hpp"
#include "glyforge/nn.hpp"
#include "glyforge/rng.hpp"
#include "glyforge/structgraph.hpp"
#include "glyforge/tensor.hpp"
#include "glyforge/util.hpp"

namespace glyforge {

// Which nodes of one graph are hidden for the recovery objective, with the
// true type ids the model must predict back.
struct MaskPlan {
  std::vector<std::int32_t> masked_monos;  // ascending residue indices
  std::vector<std::int32_t> mono_targets;  // true ids, aligned with masked_monos
  std::vector<std::int32_t> masked_atoms;  // ascending atom indices
  std::vector<std::int32_t> atom_targets;  // true ids, aligned with masked_atoms
  double rho_a = 0.0;
  double rho_m = 0.0;

  std::size_t total() const { return masked_monos.size() + masked_atoms.size(); }
};

// Two-scale masking: residues are drawn first and hide every atom they own,
// then the atom ratio applies to the remaining atom pool. Counts follow
// round-half-away-from-zero, so tiny graphs may legally mask nothing.
inline MaskPlan sample_mask(const HeteroGlycanGraph& g, double rho_a, double rho_m, Rng& rng) {
  if (rho_a < 0.0 || rho_a > 1.0 || rho_m < 0.0 || rho_m > 1.0) {
    throw ConfigError("mask ratios must lie in [0, 1]");
  }
  MaskPlan plan;
  plan.rho_a = rho_a;
  plan.rho_m = rho_m;

  const std::size_t m = g.num_monos();
  const std::size_t mono_count = round_count(rho_m * static_cast<double>(m));
  const auto picked = rng.sample_without_replacement(m, mono_count);
  std::vector<char> mono_masked(m, 0);
  for (const auto idx : picked) {
    plan.masked_monos.push_back(static_cast<std::int32_t>(idx));
    plan.mono_targets.push_back(g.mono_types[idx]);
    mono_masked[idx] = 1;
  }

  std::vector<std::int32_t> pool;
  for (std::size_t a = 0; a < g.num_atoms(); ++a) {
    if (mono_masked[static_cast<std::size_t>(g.atom_owner[a])]) {
      plan.masked_atoms.push_back(static_cast<std::int32_t>(a));
      plan.atom_targets.push_back(g.atom_types[a]);
    } else {
      pool.push_back(static_cast<std::int32_t>(a));
    }
  }
  const std::size_t atom_count = round_count(rho_a * static_cast<double>(pool.size()));
  for (const auto pos : rng.sample_without_replacement(pool.size(), atom_count)) {
    const auto a = static_cast<std::size_t>(pool[pos]);
    plan.masked_atoms.push_back(pool[pos]);
    plan.atom_targets.push_back(g.atom_types[a]);
  }

  std::vector<std::size_t> order(plan.masked_atoms.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t lhs, std::size_t rhs) {
    return plan.masked_atoms[lhs] < plan.masked_atoms[rhs];
  });
  std::vector<std::int32_t> atoms_sorted, targets_sorted;
  atoms_sorted.reserve(order.size());
  targets_sorted.reserve(order.size());
  for (const auto idx : order) {
    atoms_sorted.push_back(plan.masked_atoms[idx]);
    targets_sorted.push_back(plan.atom_targets[idx]);
  }
  plan.masked_atoms = std::move(atoms_sorted);
  plan.atom_targets = std::move(targets_sorted);
  return plan;
}

// Returns a copy of the graph with the planned nodes retyped to the unknown
// ids. Edges and ownership are untouched; the input graph is not modified.
inline HeteroGlycanGraph apply_mask(const HeteroGlycanGraph& g, const MaskPlan& plan,
                                    std::int32_t atom_unknown_id, std::int32_t mono_unknown_id) {
  HeteroGlycanGraph out = g;
  for (const auto a : plan.masked_atoms) {
    out.atom_types.at(static_cast<std::size_t>(a)) = atom_unknown_id;
  }
  for (const auto m : plan.masked_monos) {
    out.mono_types.at(static_cast<std::size_t>(m)) = mono_unknown_id;
  }
  return out;
}

// Masked node positions of a merged batch, in merged row coordinates.
struct BatchMask {
  std::vector<std::int32_t> atom_rows;
  std::vector<std::int32_t> atom_targets;
  std::vector<std::int32_t> mono_rows;
  std::vector<std::int32_t> mono_targets;

  std::size_t total() const { return atom_rows.size() + mono_rows.size(); }
};

inline BatchMask build_batch_mask(std::span<const HeteroGlycanGraph* const> graphs,
                                  std::span<const MaskPlan> plans) {
  if (graphs.size() != plans.size()) {
    throw ShapeError("one mask plan is required per graph in the batch");
  }
  BatchMask mask;
  std::int32_t atom_base = 0;
  std::int32_t mono_base = 0;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const auto& plan = plans[i];
    for (std::size_t k = 0; k < plan.masked_atoms.size(); ++k) {
      mask.atom_rows.push_back(atom_base + plan.masked_atoms[k]);
      mask.atom_targets.push_back(plan.atom_targets[k]);
    }
    for (std::size_t k = 0; k < plan.masked_monos.size(); ++k) {
      mask.mono_rows.push_back(mono_base + plan.masked_monos[k]);
      mask.mono_targets.push_back(plan.mono_targets[k]);
    }
    atom_base += static_cast<std::int32_t>(graphs[i]->num_atoms());
    mono_base += static_cast<std::int32_t>(graphs[i]->num_monos());
  }
  return mask;
}

// Recovery heads: one two-layer network per scale, mapping node
// representations to type logits through a smooth gate.
template <class T>
void add_recovery_heads(Parameters<T>& params, std::size_t hidden_dim,
                        std::size_t num_atom_types, std::size_t num_mono_types, Rng& rng) {
  add_mlp_head_params(params, "recover.atom", hidden_dim, hidden_dim, num_atom_types, rng);
  add_mlp_head_params(params, "recover.mono", hidden_dim, hidden_dim, num_mono_types, rng);
}

struct ScaleStats {
  std::size_t masked = 0;
  std::size_t correct = 0;
  double nll_sum = 0.0;

  double accuracy() const {
    return masked == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(masked);
  }
  double perplexity() const { return masked == 0 ? 1.0 : std::exp(nll_sum / static_cast<double>(masked)); }
};

struct RecoveryStats {
  ScaleStats atoms;
  ScaleStats monos;
  double loss = 0.0;
};

// Joint recovery objective: summed cross entropy over both masked scales,
// divided by the total number of masked nodes.
template <class T>
Tensor<T> recovery_loss(const Tensor<T>& atom_repr, const Tensor<T>& mono_repr,
                        const BatchMask& mask, Parameters<T>& params,
                        RecoveryStats* stats = nullptr) {
  if (mask.total() == 0) {
    throw DataError("recovery loss over an empty mask");
  }
  std::vector<Tensor<T>> pieces;
  RecoveryStats local;
  const auto run_scale = [&](const Tensor<T>& repr, const std::vector<std::int32_t>& rows,
                             const std::vector<std::int32_t>& targets, const std::string& head,
                             ScaleStats& scale) {
    if (rows.empty()) return;
    Tensor<T> selected = gather_rows(repr, rows);
    Tensor<T> logits = mlp_head_forward(selected, params, head);
    pieces.push_back(softmax_cross_entropy(logits, targets, Reduction::sum));
    scale.masked = rows.size();
    const auto nll = nll_rows(logits.values(), logits.rows(), logits.cols(), targets);
    scale.nll_sum = std::accumulate(nll.begin(), nll.end(), 0.0);
    const auto predicted = argmax_rows(logits.values(), logits.rows(), logits.cols());
    for (std::size_t r = 0; r < targets.size(); ++r) {
      if (predicted[r] == targets[r]) ++scale.correct;
    }
  };
  run_scale(atom_repr, mask.atom_rows, mask.atom_targets, "recover.atom", local.atoms);
  run_scale(mono_repr, mask.mono_rows, mask.mono_targets, "recover.mono", local.monos);

  Tensor<T> summed = pieces.size() == 1 ? pieces.front() : add(pieces[0], pieces[1]);
  Tensor<T> loss = mul_scalar(summed, static_cast<T>(1.0 / static_cast<double>(mask.total())));
  local.loss = (local.atoms.nll_sum + local.monos.nll_sum) / static_cast<double>(mask.total());
  if (stats != nullptr) *stats = local;
  return loss;
}

struct PretrainConfig {
  double rho_a = 0.45;
  double rho_m = 0.15;
  double lr = 5e-4;
  double weight_decay = 1e-3;
  int batch_size = 256;
  int epochs = 50;
  std::uint64_t seed = 0;
  // Off by default so identical runs produce identical metric logs.
  bool record_wall_time = false;

  void validate() const {
    if (rho_a < 0.0 || rho_a > 1.0 || rho_m < 0.0 || rho_m > 1.0) {
      throw ConfigError("mask ratios must lie in [0, 1]");
    }
    if (lr <= 0.0) throw ConfigError("learning rate must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
  }
};

struct EpochCurve {
  int epoch = 0;
  double loss = 0.0;
  double atom_acc = 0.0;
  double mono_acc = 0.0;
  double atom_ppl = 1.0;
  double mono_ppl = 1.0;
  double wall_s = 0.0;

  nlohmann::json to_json() const {
    return {{"epoch", epoch},         {"loss", loss},
            {"atom_acc", atom_acc},   {"mono_acc", mono_acc},
            {"atom_ppl", atom_ppl},   {"mono_ppl", mono_ppl},
            {"wall_s", wall_s}};
  }
};

template <class T>
struct PretrainResult {
  Parameters<T> params;
  std::vector<EpochCurve> curves;
  double first_batch_loss = 0.0;
  double first_batch_atom_loss = 0.0;
  double first_batch_mono_loss = 0.0;
};

// Mask-and-recover training loop. Every epoch reshuffles the corpus and
// draws fresh masks; the whole run is a pure function of the seed. When
// metrics_path is non-empty, one JSON line per epoch is written there.
template <class T = float>
PretrainResult<T> run_pretraining(std::span<const HeteroGlycanGraph> graphs,
                                  const ModelConfig& model_config, const PretrainConfig& config,
                                  std::int32_t atom_unknown_id, std::int32_t mono_unknown_id,
                                  const std::string& metrics_path = "") {
  model_config.validate();
  config.validate();
  if (graphs.empty()) throw DataError("cannot pretrain on an empty corpus");

  Rng root(config.seed);
  Rng init_rng = root.fork(1);
  Rng shuffle_rng = root.fork(2);
  Rng mask_rng = root.fork(3);

  PretrainResult<T> result;
  result.params = init_encoder_params<T>(model_config, init_rng);
  add_recovery_heads(result.params, static_cast<std::size_t>(model_config.hidden_dim),
                     static_cast<std::size_t>(model_config.num_atom_types),
                     static_cast<std::size_t>(model_config.num_mono_types), init_rng);

  AdamOptions<T> options;
  options.lr = static_cast<T>(config.lr);
  options.weight_decay = static_cast<T>(config.weight_decay);
  Adam<T> optimizer(options, result.params);

  std::vector<std::size_t> order(graphs.size());
  std::iota(order.begin(), order.end(), 0);
  bool first_batch_recorded = false;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);
    RecoveryStats epoch_stats;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));

      std::vector<const HeteroGlycanGraph*> originals;
      std::vector<MaskPlan> plans;
      originals.reserve(end - begin);
      plans.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        originals.push_back(&graphs[order[i]]);
        plans.push_back(sample_mask(graphs[order[i]], config.rho_a, config.rho_m, mask_rng));
      }
      const BatchMask mask = build_batch_mask(
          std::span<const HeteroGlycanGraph* const>(originals), std::span<const MaskPlan>(plans));
      if (mask.total() == 0) {
        std::fprintf(stderr, "warning: batch at offset %zu masked no nodes; skipped\n", begin);
        continue;
      }

      std::vector<HeteroGlycanGraph> masked;
      masked.reserve(end - begin);
      for (std::size_t i = 0; i < originals.size(); ++i) {
        masked.push_back(apply_mask(*originals[i], plans[i], atom_unknown_id, mono_unknown_id));
      }
      const GraphBatch batch = batch_graphs(std::span<const HeteroGlycanGraph>(masked));

      result.params.zero_grad();
      Tape<T> tape;
      Tensor<T> loss;
      RecoveryStats stats;
      {
        auto scope = tape.activate();
        const auto encoded = encode<T>(batch, result.params, model_config, /*training=*/true);
        loss = recovery_loss(encoded.atom_repr, encoded.mono_repr, mask, result.params, &stats);
      }
      tape.backward(loss);
      optimizer.step(result.params);

      if (!first_batch_recorded) {
        first_batch_recorded = true;
        result.first_batch_loss = stats.loss;
        result.first_batch_atom_loss =
            stats.atoms.masked == 0
                ? 0.0
                : stats.atoms.nll_sum / static_cast<double>(stats.atoms.masked);
        result.first_batch_mono_loss =
            stats.monos.masked == 0
                ? 0.0
                : stats.monos.nll_sum / static_cast<double>(stats.monos.masked);
      }
      epoch_stats.atoms.masked += stats.atoms.masked;
      epoch_stats.atoms.correct += stats.atoms.correct;
      epoch_stats.atoms.nll_sum += stats.atoms.nll_sum;
      epoch_stats.monos.masked += stats.monos.masked;
      epoch_stats.monos.correct += stats.monos.correct;
      epoch_stats.monos.nll_sum += stats.monos.nll_sum;
    }

    EpochCurve curve;
    curve.epoch = epoch;
    const std::size_t epoch_total = epoch_stats.atoms.masked + epoch_stats.monos.masked;
    curve.loss = epoch_total == 0 ? 0.0
                                  : (epoch_stats.atoms.nll_sum + epoch_stats.monos.nll_sum) /
                                        static_cast<double>(epoch_total);
    curve.atom_acc = epoch_stats.atoms.accuracy();
    curve.mono_acc = epoch_stats.monos.accuracy();
    curve.atom_ppl = epoch_stats.atoms.perplexity();
    curve.mono_ppl = epoch_stats.monos.perplexity();
    if (config.record_wall_time) {
      curve.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start)
                         .count();
    }
    result.curves.push_back(curve);
  }

  if (!metrics_path.empty()) {
    std::vector<Json> lines;
    lines.reserve(result.curves.size());
    for (const auto& curve : result.curves) lines.push_back(curve.to_json());
    write_jsonl(metrics_path, lines);
  }
  return result;
}

}  // namespace glyforge
