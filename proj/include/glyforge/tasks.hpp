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

// Downstream property prediction: task descriptions, MLP heads on top of the
// graph representation, fine-tuning with two-tier learning rates, checkpoint
// selection by validation score, and evaluation with per-sample prediction
// export. Classification heads emit logits (binary tasks use two logits and
// report the positive-class probability); protein-glycan interaction scoring
// concatenates a precomputed protein vector and regresses one scalar.

#ifndef GLYFORGE_TASKS_HPP_
#define GLYFORGE_TASKS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glyforge/encoder.hpp"
#include "glyforge/error.hpp"
#include "glyforge/io.hpp"
#include "glyforge/metrics.hpp"
#include "glyforge/nn.hpp"
#include "glyforge/rng.hpp"
#include "glyforge/structgraph.hpp"
#include "glyforge/tensor.hpp"

namespace glyforge {

enum class TaskKind { multiclass, binary, regression_interaction };
enum class TaskMetric { macro_f1, auprc, spearman };

inline std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::multiclass: return "multiclass";
    case TaskKind::binary: return "binary";
    case TaskKind::regression_interaction: return "regression-interaction";
  }
  throw ConfigError("unhandled task kind");
}

inline TaskKind task_kind_from_string(const std::string& text) {
  if (text == "multiclass") return TaskKind::multiclass;
  if (text == "binary") return TaskKind::binary;
  if (text == "regression-interaction") return TaskKind::regression_interaction;
  throw ConfigError("unknown task kind '" + text +
                    "' (expected multiclass, binary, or regression-interaction)");
}

inline std::string to_string(TaskMetric metric) {
  switch (metric) {
    case TaskMetric::macro_f1: return "macro_f1";
    case TaskMetric::auprc: return "auprc";
    case TaskMetric::spearman: return "spearman";
  }
  throw ConfigError("unhandled task metric");
}

inline TaskMetric task_metric_from_string(const std::string& text) {
  if (text == "macro_f1") return TaskMetric::macro_f1;
  if (text == "auprc") return TaskMetric::auprc;
  if (text == "spearman") return TaskMetric::spearman;
  throw ConfigError("unknown task metric '" + text +
                    "' (expected macro_f1, auprc, or spearman)");
}

// What to train and how to score it. Classification tasks default to 50
// epochs at batch 256; interaction scoring defaults to 10 epochs at batch 32.
struct TaskSpec {
  TaskKind kind = TaskKind::multiclass;
  int num_classes = 2;
  TaskMetric metric = TaskMetric::macro_f1;
  int epochs = 50;
  int batch_size = 256;

  void validate() const {
    if (epochs <= 0) throw ConfigError("task epochs must be positive");
    if (batch_size <= 0) throw ConfigError("task batch size must be positive");
    switch (kind) {
      case TaskKind::multiclass:
        if (num_classes < 2) throw ConfigError("multiclass tasks need at least two classes");
        if (metric != TaskMetric::macro_f1) {
          throw ConfigError("multiclass tasks are scored with macro_f1");
        }
        break;
      case TaskKind::binary:
        if (num_classes != 2) throw ConfigError("binary tasks have exactly two classes");
        if (metric != TaskMetric::auprc) throw ConfigError("binary tasks are scored with auprc");
        break;
      case TaskKind::regression_interaction:
        if (metric != TaskMetric::spearman) {
          throw ConfigError("interaction tasks are scored with spearman");
        }
        break;
    }
  }

  // The head's output width: class logits, or one regression scalar.
  std::size_t output_width() const {
    return kind == TaskKind::regression_interaction ? 1
                                                    : static_cast<std::size_t>(num_classes);
  }

  static TaskSpec multiclass_spec(int num_classes) {
    TaskSpec spec;
    spec.kind = TaskKind::multiclass;
    spec.num_classes = num_classes;
    spec.metric = TaskMetric::macro_f1;
    return spec;
  }

  static TaskSpec binary_spec() {
    TaskSpec spec;
    spec.kind = TaskKind::binary;
    spec.num_classes = 2;
    spec.metric = TaskMetric::auprc;
    return spec;
  }

  static TaskSpec interaction_spec() {
    TaskSpec spec;
    spec.kind = TaskKind::regression_interaction;
    spec.num_classes = 0;
    spec.metric = TaskMetric::spearman;
    spec.epochs = 10;
    spec.batch_size = 32;
    return spec;
  }
};

inline Json task_spec_to_json(const TaskSpec& spec) {
  return Json{{"kind", to_string(spec.kind)},
              {"num_classes", spec.num_classes},
              {"metric", to_string(spec.metric)},
              {"epochs", spec.epochs},
              {"batch_size", spec.batch_size}};
}

inline TaskSpec task_spec_from_json(const Json& j) {
  TaskSpec spec;
  spec.kind = task_kind_from_string(j.at("kind").get<std::string>());
  if (spec.kind == TaskKind::regression_interaction) {
    spec.epochs = 10;
    spec.batch_size = 32;
    spec.num_classes = 0;
    spec.metric = TaskMetric::spearman;
  }
  if (j.contains("num_classes")) spec.num_classes = j.at("num_classes").get<int>();
  if (j.contains("metric")) spec.metric = task_metric_from_string(j.at("metric").get<std::string>());
  if (j.contains("epochs")) spec.epochs = j.at("epochs").get<int>();
  if (j.contains("batch_size")) spec.batch_size = j.at("batch_size").get<int>();
  spec.validate();
  return spec;
}

// One split of labeled samples. `proteins` stays empty except for
// interaction tasks, where row k is the protein partner of graph k.
template <class T>
struct TaskSplit {
  std::vector<HeteroGlycanGraph> graphs;
  std::vector<std::string> canonical;
  std::vector<double> labels;
  std::vector<std::vector<T>> proteins;

  std::size_t size() const { return graphs.size(); }
  bool empty() const { return graphs.empty(); }

  void validate(bool needs_proteins) const {
    if (canonical.size() != graphs.size() || labels.size() != graphs.size()) {
      throw ShapeError("task split fields disagree on the sample count");
    }
    if (needs_proteins && proteins.size() != graphs.size()) {
      throw ShapeError("interaction split is missing protein vectors");
    }
  }
};

template <class T>
struct TaskDataset {
  TaskSplit<T> train;
  TaskSplit<T> valid;
  TaskSplit<T> test;
  std::size_t protein_dim = 0;
};

// Adds the prediction head: a 2-layer GELU MLP from the graph vector (width
// 2d, plus the protein width for interaction tasks) through a 2d-wide hidden
// layer to the task's output width.
template <class T>
void add_task_head(Parameters<T>& params, const TaskSpec& spec, int hidden_dim,
                   std::size_t protein_dim, Rng& rng) {
  const std::size_t graph_width = 2 * static_cast<std::size_t>(hidden_dim);
  const std::size_t in_width =
      graph_width + (spec.kind == TaskKind::regression_interaction ? protein_dim : 0);
  add_mlp_head_params<T>(params, "task", in_width, graph_width, spec.output_width(), rng);
}

// Builds one matrix whose row k is the protein vector of sample `rows[k]`.
template <class T>
Tensor<T> protein_matrix(const TaskSplit<T>& split, std::span<const std::size_t> rows,
                         std::size_t protein_dim) {
  std::vector<T> flat;
  flat.reserve(rows.size() * protein_dim);
  for (const auto r : rows) {
    const auto& vec = split.proteins.at(r);
    if (vec.size() != protein_dim) {
      throw ShapeError("protein vector width " + std::to_string(vec.size()) +
                       " does not match the dataset's " + std::to_string(protein_dim));
    }
    flat.insert(flat.end(), vec.begin(), vec.end());
  }
  return Tensor<T>::from(rows.size(), protein_dim, flat);
}

// Head forward pass over precomputed graph vectors. `protein` may be an
// empty tensor for tasks without a partner input.
template <class T>
Tensor<T> task_head_forward(const Tensor<T>& graph_vecs, const Tensor<T>& protein,
                            Parameters<T>& params) {
  if (protein.rows() == 0) return mlp_head_forward(graph_vecs, params, "task");
  return mlp_head_forward(concat_cols(graph_vecs, protein), params, "task");
}

inline std::size_t select_best_epoch(std::span<const double> valid_metrics) {
  if (valid_metrics.empty()) throw EmptyInputError("no validation scores to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < valid_metrics.size(); ++i) {
    if (valid_metrics[i] > valid_metrics[best]) best = i;
  }
  return best;
}

template <class T>
struct EvalReport {
  double metric = 0.0;
  // Per-sample model output: predicted class id for multiclass, positive
  // class probability for binary, the raw scalar for interaction.
  std::vector<double> outputs;
  std::vector<std::int32_t> pred_ids;  // classification kinds only
};

namespace detail {

inline std::int32_t label_as_class(double label) {
  const auto id = static_cast<std::int32_t>(std::llround(label));
  if (std::abs(label - static_cast<double>(id)) > 1e-9) {
    throw DataError("classification label " + std::to_string(label) + " is not an integer");
  }
  return id;
}

// Forward one chunk of samples in eval mode and append the per-sample
// outputs. Batch composition cannot change results: normalization layers use
// their running statistics outside training.
template <class T>
void eval_chunk(const TaskSplit<T>& split, std::span<const std::size_t> rows,
                Parameters<T>& params, const ModelConfig& model_config, const TaskSpec& spec,
                std::size_t protein_dim, EvalReport<T>& report) {
  std::vector<const HeteroGlycanGraph*> ptrs;
  ptrs.reserve(rows.size());
  for (const auto r : rows) ptrs.push_back(&split.graphs[r]);
  const auto batch = batch_graphs(std::span<const HeteroGlycanGraph* const>(ptrs));
  auto encoded = encode(batch, params, model_config, /*training=*/false);
  Tensor<T> protein = Tensor<T>::zeros(0, 0);
  if (spec.kind == TaskKind::regression_interaction) {
    protein = protein_matrix(split, rows, protein_dim);
  }
  const auto logits = task_head_forward(encoded.graph_repr, protein, params);
  const auto& values = logits.values();
  const std::size_t width = logits.cols();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    switch (spec.kind) {
      case TaskKind::multiclass: {
        std::size_t best = 0;
        for (std::size_t c = 1; c < width; ++c) {
          if (values[k * width + c] > values[k * width + best]) best = c;
        }
        report.pred_ids.push_back(static_cast<std::int32_t>(best));
        report.outputs.push_back(static_cast<double>(best));
        break;
      }
      case TaskKind::binary: {
        const double l0 = static_cast<double>(values[k * width + 0]);
        const double l1 = static_cast<double>(values[k * width + 1]);
        const double m = std::max(l0, l1);
        const double p1 = std::exp(l1 - m) / (std::exp(l0 - m) + std::exp(l1 - m));
        report.pred_ids.push_back(p1 >= 0.5 ? 1 : 0);
        report.outputs.push_back(p1);
        break;
      }
      case TaskKind::regression_interaction:
        report.outputs.push_back(static_cast<double>(values[k]));
        break;
    }
  }
}

}  // namespace detail

// Scores one split with the task's metric. When `predictions_path` is set,
// writes one JSON line per sample in split order.
template <class T = float>
EvalReport<T> evaluate(const TaskSplit<T>& split, Parameters<T>& params,
                       const ModelConfig& model_config, const TaskSpec& spec,
                       std::size_t protein_dim = 0, const std::string& predictions_path = "") {
  spec.validate();
  if (split.empty()) throw EmptyInputError("cannot evaluate an empty split");
  split.validate(spec.kind == TaskKind::regression_interaction);

  EvalReport<T> report;
  std::vector<std::size_t> rows(split.size());
  std::iota(rows.begin(), rows.end(), 0u);
  const auto chunk = static_cast<std::size_t>(spec.batch_size);
  for (std::size_t begin = 0; begin < rows.size(); begin += chunk) {
    const std::size_t end = std::min(begin + chunk, rows.size());
    detail::eval_chunk(split, std::span<const std::size_t>(rows).subspan(begin, end - begin),
                       params, model_config, spec, protein_dim, report);
  }

  switch (spec.kind) {
    case TaskKind::multiclass: {
      std::vector<std::int32_t> truth;
      truth.reserve(split.size());
      for (const double label : split.labels) truth.push_back(detail::label_as_class(label));
      report.metric = macro_f1(report.pred_ids, truth,
                               static_cast<std::size_t>(spec.num_classes));
      break;
    }
    case TaskKind::binary: {
      std::vector<std::int32_t> truth;
      truth.reserve(split.size());
      for (const double label : split.labels) truth.push_back(detail::label_as_class(label));
      report.metric = auprc(report.outputs, truth);
      break;
    }
    case TaskKind::regression_interaction:
      report.metric = spearman_rho(report.outputs, split.labels);
      break;
  }

  if (!predictions_path.empty()) {
    std::vector<Json> lines;
    lines.reserve(split.size());
    for (std::size_t i = 0; i < split.size(); ++i) {
      Json row{{"glycan", split.canonical[i]}, {"label", split.labels[i]}};
      if (spec.kind == TaskKind::binary) {
        row["prediction"] = report.pred_ids[i];
        row["score"] = report.outputs[i];
      } else if (spec.kind == TaskKind::multiclass) {
        row["prediction"] = report.pred_ids[i];
      } else {
        row["prediction"] = report.outputs[i];
      }
      lines.push_back(std::move(row));
    }
    write_jsonl(predictions_path, lines);
  }
  return report;
}

enum class FinetuneMode { scratch, pretrained };

inline std::string to_string(FinetuneMode mode) {
  return mode == FinetuneMode::scratch ? "scratch" : "pretrained";
}

inline FinetuneMode finetune_mode_from_string(const std::string& text) {
  if (text == "scratch") return FinetuneMode::scratch;
  if (text == "pretrained") return FinetuneMode::pretrained;
  throw ConfigError("unknown fine-tune mode '" + text + "' (expected scratch or pretrained)");
}

struct FinetuneConfig {
  FinetuneMode mode = FinetuneMode::scratch;
  double head_lr = 5e-4;
  // Warm-started encoders train one tenth as fast as the fresh head.
  double pretrained_encoder_lr = 5e-5;
  double weight_decay = 1e-3;
  std::uint64_t seed = 0;

  void validate() const {
    if (head_lr <= 0.0 || pretrained_encoder_lr <= 0.0) {
      throw ConfigError("learning rates must be positive");
    }
    if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  }
};

struct FinetuneEpoch {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double valid_metric = 0.0;

  Json to_json() const {
    return Json{{"epoch", epoch}, {"train_loss", train_loss}, {"valid_metric", valid_metric}};
  }
};

template <class T>
struct FinetuneResult {
  Parameters<T> params;  // weights from the best-validation epoch
  std::vector<FinetuneEpoch> curves;
  int best_epoch = 0;  // 1-based
  double best_valid_metric = 0.0;
};

// Sets the optimizer learning rates for the given mode: everything at
// `head_lr` from scratch, encoder prefixes dropped to
// `pretrained_encoder_lr` when warm-started.
template <class T>
void apply_lr_tiers(Adam<T>& optimizer, const FinetuneConfig& config) {
  if (config.mode != FinetuneMode::pretrained) return;
  optimizer.set_lr_for_prefix("embed.", static_cast<T>(config.pretrained_encoder_lr));
  optimizer.set_lr_for_prefix("block", static_cast<T>(config.pretrained_encoder_lr));
}

// Trains encoder plus task head and returns the weights of the epoch with
// the best validation score (ties keep the earliest epoch). `warm_start`
// must carry encoder parameters when mode is pretrained and must be null for
// scratch runs; auxiliary heads in the warm start (anything outside the
// encoder namespace) are dropped.
template <class T = float>
FinetuneResult<T> finetune(const TaskDataset<T>& data, const ModelConfig& model_config,
                           const TaskSpec& spec, const FinetuneConfig& config,
                           const Parameters<T>* warm_start = nullptr,
                           const std::string& metrics_path = "") {
  spec.validate();
  config.validate();
  model_config.validate();
  if ((config.mode == FinetuneMode::pretrained) != (warm_start != nullptr)) {
    throw ConfigError("pretrained mode requires warm-start parameters and scratch forbids them");
  }
  const bool interaction = spec.kind == TaskKind::regression_interaction;
  if (data.train.empty()) throw EmptyInputError("cannot fine-tune without training samples");
  if (data.valid.empty()) throw EmptyInputError("cannot fine-tune without validation samples");
  data.train.validate(interaction);
  data.valid.validate(interaction);

  Rng root(config.seed);
  Rng init_rng = root.fork(1);
  Rng shuffle_rng = root.fork(2);

  Parameters<T> params;
  if (config.mode == FinetuneMode::scratch) {
    params = init_encoder_params<T>(model_config, init_rng);
  } else {
    for (const auto& [name, tensor] : *warm_start) {
      const bool encoder_param = name.rfind("embed.", 0) == 0 || name.rfind("block", 0) == 0;
      if (!encoder_param) continue;
      Tensor<T> copy = tensor.clone();
      copy.set_requires_grad(tensor.requires_grad());
      params.emplace(name, std::move(copy));
    }
  }
  add_task_head(params, spec, model_config.hidden_dim, data.protein_dim, init_rng);

  AdamOptions<T> options;
  options.lr = static_cast<T>(config.head_lr);
  options.weight_decay = static_cast<T>(config.weight_decay);
  Adam<T> optimizer(options, params);
  apply_lr_tiers(optimizer, config);

  FinetuneResult<T> result;
  std::vector<double> valid_history;
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0u);

  for (int epoch = 1; epoch <= spec.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    const auto chunk = static_cast<std::size_t>(spec.batch_size);
    for (std::size_t begin = 0; begin < order.size(); begin += chunk) {
      const std::size_t end = std::min(begin + chunk, order.size());
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);

      std::vector<const HeteroGlycanGraph*> ptrs;
      ptrs.reserve(rows.size());
      for (const auto r : rows) ptrs.push_back(&data.train.graphs[r]);
      const auto batch = batch_graphs(std::span<const HeteroGlycanGraph* const>(ptrs));

      params.zero_grad();
      Tape<T> tape;
      Tensor<T> loss;
      {
        auto scope = tape.activate();
        auto encoded = encode(batch, params, model_config, /*training=*/true);
        Tensor<T> protein = Tensor<T>::zeros(0, 0);
        if (interaction) protein = protein_matrix(data.train, rows, data.protein_dim);
        const auto out = task_head_forward(encoded.graph_repr, protein, params);
        if (interaction) {
          std::vector<T> targets;
          targets.reserve(rows.size());
          for (const auto r : rows) targets.push_back(static_cast<T>(data.train.labels[r]));
          loss = mse_loss(out, targets);
        } else {
          std::vector<std::int32_t> targets;
          targets.reserve(rows.size());
          for (const auto r : rows) {
            targets.push_back(detail::label_as_class(data.train.labels[r]));
          }
          loss = softmax_cross_entropy(out, targets, Reduction::mean);
        }
      }
      tape.backward(loss);
      optimizer.step(params);
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(rows.size());
      loss_count += rows.size();
    }

    const auto valid_report = evaluate(data.valid, params, model_config, spec, data.protein_dim);
    valid_history.push_back(valid_report.metric);
    FinetuneEpoch point;
    point.epoch = epoch;
    point.train_loss = loss_sum / static_cast<double>(loss_count);
    point.valid_metric = valid_report.metric;
    result.curves.push_back(point);

    const auto best = select_best_epoch(valid_history);
    if (best + 1 == static_cast<std::size_t>(epoch)) {
      result.params = params.clone();
      result.best_epoch = epoch;
      result.best_valid_metric = valid_report.metric;
    }
  }

  if (!metrics_path.empty()) {
    std::vector<Json> lines;
    lines.reserve(result.curves.size());
    for (const auto& point : result.curves) lines.push_back(point.to_json());
    write_jsonl(metrics_path, lines);
  }
  return result;
}

}  // namespace glyforge

#endif  // GLYFORGE_TASKS_HPP_
