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

// Throughput and memory measurement. A benchmark drives the same batches
// through a training step (forward, masked-recovery loss, backward, update)
// and an inference pass (forward only), skips a declared number of warmup
// batches, repeats the measured pass, and reports the repeat with the median
// elapsed time so that throughput times elapsed equals the sample count
// exactly. Peak memory is the tensor allocator's high-water mark; the
// process resident-set peak is carried as a secondary figure.

#ifndef GLYFORGE_BENCHKIT_HPP_
#define GLYFORGE_BENCHKIT_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "glyforge/encoder.hpp"
#include "glyforge/error.hpp"
#include "glyforge/io.hpp"
#include "glyforge/nn.hpp"
#include "glyforge/pretrain.hpp"
#include "glyforge/rng.hpp"
#include "glyforge/structgraph.hpp"
#include "glyforge/tensor.hpp"

namespace glyforge {

struct BenchReport {
  std::string variant;
  std::size_t samples = 0;  // per measured pass

  double training_throughput = 0.0;  // samples per second
  double inference_throughput = 0.0;
  double training_elapsed_s = 0.0;  // median repeat
  double inference_elapsed_s = 0.0;
  double training_throughput_std = 0.0;  // across repeats
  double inference_throughput_std = 0.0;
  double training_peak_mem_mib = 0.0;  // tensor allocator high-water
  double inference_peak_mem_mib = 0.0;
  double rss_peak_mib = 0.0;  // process-level, secondary

  int batch_size = 0;
  int warmup_batches = 0;
  int measured_batches = 0;
  int repeats = 0;
  int threads = 1;

  Json to_json() const {
    return Json{{"variant", variant},
                {"samples", samples},
                {"training_throughput", training_throughput},
                {"inference_throughput", inference_throughput},
                {"training_elapsed_s", training_elapsed_s},
                {"inference_elapsed_s", inference_elapsed_s},
                {"training_throughput_std", training_throughput_std},
                {"inference_throughput_std", inference_throughput_std},
                {"training_peak_mem_mib", training_peak_mem_mib},
                {"inference_peak_mem_mib", inference_peak_mem_mib},
                {"rss_peak_mib", rss_peak_mib},
                {"batch_size", batch_size},
                {"warmup_batches", warmup_batches},
                {"measured_batches", measured_batches},
                {"repeats", repeats},
                {"threads", threads}};
  }

  std::string table() const {
    char line[256];
    std::ostringstream out;
    out << "benchmark: " << variant << " (batch " << batch_size << ", " << measured_batches
        << " measured batches, " << repeats << " repeats, " << threads << " thread"
        << (threads == 1 ? "" : "s") << ")\n";
    out << "  mode        samples/s      elapsed_s   peak_mem_mib\n";
    std::snprintf(line, sizeof(line), "  training   %10.1f   %12.4f   %12.2f\n",
                  training_throughput, training_elapsed_s, training_peak_mem_mib);
    out << line;
    std::snprintf(line, sizeof(line), "  inference  %10.1f   %12.4f   %12.2f\n",
                  inference_throughput, inference_elapsed_s, inference_peak_mem_mib);
    out << line;
    return out.str();
  }
};

namespace detail {

// Resident-set high-water of this process in MiB, or 0 where unavailable.
inline double rss_peak_mib() {
  std::ifstream status("/proc/self/status");
  std::string line;
  while (std::getline(status, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      std::istringstream fields(line.substr(6));
      double kib = 0.0;
      fields >> kib;
      return kib / 1024.0;
    }
  }
  return 0.0;
}

inline double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

inline double std_dev(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (const double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (const double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(values.size()));
}

}  // namespace detail

// Measures one model variant over a dataset. Warmup batches run before the
// clock starts; each repeat then processes the whole dataset once. Mask
// plans and batch layouts are prepared up front so the timed region covers
// the model work itself.
template <class T = float>
BenchReport run_bench(const ModelConfig& model_config, std::span<const HeteroGlycanGraph> dataset,
                      std::int32_t atom_unknown_id, std::int32_t mono_unknown_id,
                      int batch_size = 256, int warmup_batches = 2, int repeats = 3,
                      std::uint64_t seed = 0, int threads = 1) {
  model_config.validate();
  if (dataset.empty()) throw DataError("benchmark dataset is empty");
  if (batch_size <= 0) throw ConfigError("benchmark batch size must be positive");
  if (warmup_batches < 0) throw ConfigError("warmup batch count must be non-negative");
  if (repeats < 1) throw ConfigError("benchmark needs at least one repeat");

  BenchReport report;
  report.variant = to_string(model_config.variant);
  report.samples = dataset.size();
  report.batch_size = batch_size;
  report.warmup_batches = warmup_batches;
  report.repeats = repeats;
  report.threads = threads;

  // Prepared batches: disjoint unions of masked graphs plus recovery targets.
  // Built before any clock starts so the timed region covers model work only.
  struct PreparedBatch {
    GraphBatch batch;
    BatchMask mask;
  };
  const PretrainConfig mask_ratios;
  Rng rng(seed);
  std::vector<PreparedBatch> batches;
  for (std::size_t begin = 0; begin < dataset.size();
       begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(begin + static_cast<std::size_t>(batch_size), dataset.size());
    std::vector<const HeteroGlycanGraph*> originals;
    std::vector<MaskPlan> plans;
    for (std::size_t i = begin; i < end; ++i) {
      originals.push_back(&dataset[i]);
      plans.push_back(sample_mask(dataset[i], mask_ratios.rho_a, mask_ratios.rho_m, rng));
    }
    PreparedBatch prepared;
    prepared.mask = build_batch_mask(std::span<const HeteroGlycanGraph* const>(originals),
                                     std::span<const MaskPlan>(plans));
    std::vector<HeteroGlycanGraph> masked;
    for (std::size_t i = begin; i < end; ++i) {
      masked.push_back(
          apply_mask(dataset[i], plans[i - begin], atom_unknown_id, mono_unknown_id));
    }
    prepared.batch = batch_graphs(std::span<const HeteroGlycanGraph>(masked));
    batches.push_back(std::move(prepared));
  }
  report.measured_batches = static_cast<int>(batches.size());

  Rng init_rng(seed + 1);
  auto params = init_encoder_params<T>(model_config, init_rng);
  add_recovery_heads(params, static_cast<std::size_t>(model_config.hidden_dim),
                     static_cast<std::size_t>(model_config.num_atom_types),
                     static_cast<std::size_t>(model_config.num_mono_types), init_rng);
  Adam<T> optimizer(AdamOptions<T>{}, params);

  const auto train_step = [&](const PreparedBatch& prepared) {
    params.zero_grad();
    Tape<T> tape;
    Tensor<T> loss;
    {
      auto scope = tape.activate();
      auto encoded = encode(prepared.batch, params, model_config, /*training=*/true);
      loss = recovery_loss(encoded.atom_repr, encoded.mono_repr, prepared.mask, params);
    }
    tape.backward(loss);
    optimizer.step(params);
  };
  const auto infer_step = [&](const PreparedBatch& prepared) {
    encode(prepared.batch, params, model_config, /*training=*/false);
  };

  const auto measure = [&](const auto& step, double* throughput, double* elapsed_s,
                           double* throughput_std, double* peak_mib) {
    for (int w = 0; w < warmup_batches; ++w) step(batches[static_cast<std::size_t>(w) %
                                                          batches.size()]);
    TensorAllocStats::reset_peak();
    std::vector<double> elapsed_runs;
    for (int r = 0; r < repeats; ++r) {
      const auto start = std::chrono::steady_clock::now();
      for (const auto& prepared : batches) step(prepared);
      const auto stop = std::chrono::steady_clock::now();
      elapsed_runs.push_back(std::chrono::duration<double>(stop - start).count());
    }
    *elapsed_s = detail::median(elapsed_runs);
    *throughput = static_cast<double>(report.samples) / *elapsed_s;
    std::vector<double> throughputs;
    for (const double e : elapsed_runs) {
      throughputs.push_back(static_cast<double>(report.samples) / e);
    }
    *throughput_std = detail::std_dev(throughputs);
    *peak_mib =
        static_cast<double>(TensorAllocStats::peak_bytes()) / (1024.0 * 1024.0);
  };

  measure(train_step, &report.training_throughput, &report.training_elapsed_s,
          &report.training_throughput_std, &report.training_peak_mem_mib);
  measure(infer_step, &report.inference_throughput, &report.inference_elapsed_s,
          &report.inference_throughput_std, &report.inference_peak_mem_mib);
  report.rss_peak_mib = detail::rss_peak_mib();
  return report;
}

}  // namespace glyforge

#endif  // GLYFORGE_BENCHKIT_HPP_
