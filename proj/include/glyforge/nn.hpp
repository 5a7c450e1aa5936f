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

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "glyforge/error.hpp"
#include "glyforge/rng.hpp"
#include "glyforge/tensor.hpp"

namespace glyforge {

// Named model state. Iteration order is the sorted name order, which keeps
// optimizer updates and serialization deterministic. Non-trainable buffers
// (running statistics) live here too, with requires_grad off.
template <class T>
class Parameters {
 public:
  Tensor<T>& emplace(const std::string& name, Tensor<T> tensor) {
    auto [it, inserted] = map_.emplace(name, std::move(tensor));
    if (!inserted) throw ConfigError("duplicate parameter name: " + name);
    return it->second;
  }

  bool contains(const std::string& name) const { return map_.count(name) > 0; }

  Tensor<T>& at(const std::string& name) {
    const auto it = map_.find(name);
    if (it == map_.end()) throw ConfigError("unknown parameter name: " + name);
    return it->second;
  }

  const Tensor<T>& at(const std::string& name) const {
    const auto it = map_.find(name);
    if (it == map_.end()) throw ConfigError("unknown parameter name: " + name);
    return it->second;
  }

  void zero_grad() {
    for (auto& [name, tensor] : map_) tensor.zero_grad();
  }

  std::size_t size() const { return map_.size(); }

  std::size_t num_trainable_values() const {
    std::size_t n = 0;
    for (const auto& [name, tensor] : map_) {
      if (tensor.requires_grad()) n += tensor.numel();
    }
    return n;
  }

  auto begin() { return map_.begin(); }
  auto end() { return map_.end(); }
  auto begin() const { return map_.begin(); }
  auto end() const { return map_.end(); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(map_.size());
    for (const auto& [name, tensor] : map_) out.push_back(name);
    return out;
  }

  // Deep copy; the clone's tensors keep their requires_grad flags.
  Parameters clone() const {
    Parameters out;
    for (const auto& [name, tensor] : map_) {
      Tensor<T> copy = tensor.clone();
      copy.set_requires_grad(tensor.requires_grad());
      out.map_.emplace(name, std::move(copy));
    }
    return out;
  }

  // Copies values from another parameter set with identical names/shapes.
  void load_values(const Parameters& other) {
    if (other.size() != size()) throw ConfigError("parameter sets differ in size");
    auto it = map_.begin();
    auto ot = other.map_.begin();
    for (; it != map_.end(); ++it, ++ot) {
      if (it->first != ot->first || it->second.numel() != ot->second.numel()) {
        throw ConfigError("parameter sets are not aligned at " + it->first);
      }
      it->second.values() = ot->second.values();
    }
  }

 private:
  std::map<std::string, Tensor<T>> map_;
};

// Kernel initialization: uniform in +-1/sqrt(fan_in), with fan_in the row
// count since kernels are stored input x output.
template <class T>
Tensor<T> uniform_init(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  Tensor<T> t = Tensor<T>::zeros(rows, cols, true);
  auto& v = t.values();
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

// Embedding initialization: unit normal entries.
template <class T>
Tensor<T> normal_init(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor<T> t = Tensor<T>::zeros(rows, cols, true);
  auto& v = t.values();
  for (auto& x : v) x = static_cast<T>(rng.normal());
  return t;
}

template <class T>
Tensor<T> constant_init(std::size_t rows, std::size_t cols, T value, bool requires_grad) {
  Tensor<T> t = Tensor<T>::zeros(rows, cols, requires_grad);
  auto& v = t.values();
  for (auto& x : v) x = value;
  return t;
}

// Adds the four batch norm tensors for one stage under the given prefix.
template <class T>
void add_batch_norm_params(Parameters<T>& params, const std::string& prefix, std::size_t width) {
  params.emplace(prefix + ".bn.gamma", constant_init<T>(1, width, T(1), true));
  params.emplace(prefix + ".bn.beta", constant_init<T>(1, width, T(0), true));
  params.emplace(prefix + ".bn.running_mean", constant_init<T>(1, width, T(0), false));
  params.emplace(prefix + ".bn.running_var", constant_init<T>(1, width, T(1), false));
}

// Adds a two layer head with a GELU between the layers:
// in -> hidden -> out.
template <class T>
void add_mlp_head_params(Parameters<T>& params, const std::string& prefix, std::size_t in,
                         std::size_t hidden, std::size_t out, Rng& rng) {
  params.emplace(prefix + ".W1", uniform_init<T>(in, hidden, rng));
  params.emplace(prefix + ".b1", constant_init<T>(1, hidden, T(0), true));
  params.emplace(prefix + ".W2", uniform_init<T>(hidden, out, rng));
  params.emplace(prefix + ".b2", constant_init<T>(1, out, T(0), true));
}

template <class T>
Tensor<T> mlp_head_forward(const Tensor<T>& x, Parameters<T>& params,
                           const std::string& prefix) {
  Tensor<T> h = gelu(add_bias(matmul(x, params.at(prefix + ".W1")), params.at(prefix + ".b1")));
  return add_bias(matmul(h, params.at(prefix + ".W2")), params.at(prefix + ".b2"));
}

template <class T>
struct AdamOptions {
  T lr = T(5e-4);
  T weight_decay = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

// Adam with decoupled weight decay. The decay multiplies parameters by
// (1 - lr * wd) before the moment update, so it never enters the moments.
// Per-name learning rates come from the longest matching prefix override,
// which is how fine-tuning runs the encoder slower than the heads.
template <class T>
class Adam {
 public:
  Adam(const AdamOptions<T>& options, const Parameters<T>& params) : options_(options) {
    for (const auto& [name, tensor] : params) {
      if (!tensor.requires_grad()) continue;
      State s;
      s.m.assign(tensor.numel(), T(0));
      s.v.assign(tensor.numel(), T(0));
      state_.emplace(name, std::move(s));
    }
  }

  void set_lr_for_prefix(const std::string& prefix, T lr) { overrides_[prefix] = lr; }

  T lr_for(const std::string& name) const {
    std::size_t best_len = 0;
    T lr = options_.lr;
    for (const auto& [prefix, value] : overrides_) {
      if (name.rfind(prefix, 0) == 0 && prefix.size() >= best_len) {
        best_len = prefix.size();
        lr = value;
      }
    }
    return lr;
  }

  std::size_t step_count() const { return t_; }
  const AdamOptions<T>& options() const { return options_; }

  void step(Parameters<T>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(options_.beta1), static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(static_cast<double>(options_.beta2), static_cast<double>(t_));
    for (auto& [name, tensor] : params) {
      if (!tensor.requires_grad()) continue;
      auto it = state_.find(name);
      if (it == state_.end()) throw ConfigError("optimizer has no state for " + name);
      State& s = it->second;
      auto& value = tensor.values();
      const T lr = lr_for(name);
      if (options_.weight_decay != T(0)) {
        const T shrink = T(1) - lr * options_.weight_decay;
        for (auto& v : value) v *= shrink;
      }
      // A parameter the loss never touched has no gradient buffer; its
      // gradient is zero and only the decay above moves it.
      const bool has_grad = tensor.has_grad();
      for (std::size_t i = 0; i < value.size(); ++i) {
        const T g = has_grad ? tensor.grad()[i] : T(0);
        s.m[i] = options_.beta1 * s.m[i] + (T(1) - options_.beta1) * g;
        s.v[i] = options_.beta2 * s.v[i] + (T(1) - options_.beta2) * g * g;
        const double mhat = static_cast<double>(s.m[i]) / bc1;
        const double vhat = static_cast<double>(s.v[i]) / bc2;
        value[i] -= static_cast<T>(static_cast<double>(lr) * mhat /
                                   (std::sqrt(vhat) + static_cast<double>(options_.eps)));
      }
    }
  }

  // Serialization access: moment vectors keyed by parameter name.
  struct State {
    std::vector<T> m;
    std::vector<T> v;
  };

  const std::map<std::string, State>& state() const { return state_; }
  std::map<std::string, State>& mutable_state() { return state_; }
  void set_step_count(std::size_t t) { t_ = t; }

 private:
  AdamOptions<T> options_;
  std::map<std::string, State> state_;
  std::map<std::string, T> overrides_;
  std::size_t t_ = 0;
};

}  // namespace glyforge
