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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "glyforge/error.hpp"
#include "glyforge/nn.hpp"
#include "glyforge/tensor.hpp"

namespace glyforge {

// A loss builder constructs a fresh scalar loss from the current parameter
// values on each call. Called under an active tape for the analytic pass
// and with no tape for the finite difference probes.
template <class T>
using LossFn = std::function<Tensor<T>()>;

template <class T>
std::map<std::string, std::vector<T>> analytic_gradients(const LossFn<T>& loss_fn,
                                                         Parameters<T>& params) {
  params.zero_grad();
  Tape<T> tape;
  Tensor<T> loss;
  {
    auto scope = tape.activate();
    loss = loss_fn();
  }
  tape.backward(loss);
  std::map<std::string, std::vector<T>> out;
  for (const auto& [name, tensor] : params) {
    if (!tensor.requires_grad()) continue;
    if (tensor.has_grad()) {
      out[name] = tensor.grad();
    } else {
      out[name] = std::vector<T>(tensor.numel(), T(0));
    }
  }
  return out;
}

// Central differences over every trainable value. The loss builder runs
// without a tape, so only forward values are computed.
template <class T>
std::map<std::string, std::vector<T>> fd_gradients(const LossFn<T>& loss_fn,
                                                   Parameters<T>& params, T step) {
  std::map<std::string, std::vector<T>> out;
  for (auto& [name, tensor] : params) {
    if (!tensor.requires_grad()) continue;
    std::vector<T> grad(tensor.numel(), T(0));
    auto& values = tensor.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T saved = values[i];
      values[i] = saved + step;
      const double up = static_cast<double>(loss_fn().item());
      values[i] = saved - step;
      const double down = static_cast<double>(loss_fn().item());
      values[i] = saved;
      grad[i] = static_cast<T>((up - down) / (2.0 * static_cast<double>(step)));
    }
    out[name] = std::move(grad);
  }
  return out;
}

struct GradCheckEntry {
  std::string name;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double fd_at_worst = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> per_parameter;
  double max_rel_err = 0.0;
  double tolerance = 0.0;

  bool passed() const { return max_rel_err <= tolerance; }
};

// Relative error with an absolute floor, so tiny gradients near zero do
// not blow the ratio up: |a - f| / max(|a|, |f|, 1e-6).
template <class T>
GradCheckReport compare_gradients(const std::map<std::string, std::vector<T>>& analytic,
                                  const std::map<std::string, std::vector<T>>& fd,
                                  double tolerance) {
  GradCheckReport report;
  report.tolerance = tolerance;
  for (const auto& [name, a] : analytic) {
    const auto it = fd.find(name);
    if (it == fd.end() || it->second.size() != a.size()) {
      throw ConfigError("gradient maps are not aligned at " + name);
    }
    GradCheckEntry entry;
    entry.name = name;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double av = static_cast<double>(a[i]);
      const double fv = static_cast<double>(it->second[i]);
      const double abs_err = std::abs(av - fv);
      const double rel_err = abs_err / std::max({std::abs(av), std::abs(fv), 1e-6});
      if (rel_err > entry.max_rel_err) {
        entry.max_rel_err = rel_err;
        entry.max_abs_err = abs_err;
        entry.worst_index = i;
        entry.analytic_at_worst = av;
        entry.fd_at_worst = fv;
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.per_parameter.push_back(std::move(entry));
  }
  return report;
}

template <class T>
GradCheckReport finite_diff_check(const LossFn<T>& loss_fn, Parameters<T>& params,
                                  double tolerance, T step) {
  const auto analytic = analytic_gradients(loss_fn, params);
  const auto fd = fd_gradients(loss_fn, params, step);
  return compare_gradients(analytic, fd, tolerance);
}

}  // namespace glyforge
