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
//
// Deliberately naive reference implementations used as test oracles. These
// avoid the library's tensor machinery on purpose: plain loops over plain
// vectors, written straight from the update definitions.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "glyforge/encoder.hpp"
#include "glyforge/structgraph.hpp"

namespace glyforge_test {

// Per-node, per-relation reference of the relational update in inference
// mode: out_i = z_i . W_self + relu(bn(sum_r mean_{j in N_r(i)} z_j . W_r)),
// with bn applying the running statistics columnwise. All matrices are
// row-major with kernels stored input-by-output.
template <class T>
std::vector<T> nodewise_relational_update(
    const std::vector<T>& z, std::size_t num_nodes, std::size_t d,
    const glyforge::StageTopology& topo, const std::vector<T>& w_self,
    const std::vector<std::vector<T>>& w_rel, const std::vector<T>& gamma,
    const std::vector<T>& beta, const std::vector<T>& running_mean,
    const std::vector<T>& running_var, T eps = T(1e-5)) {
  std::vector<T> out(num_nodes * d, T(0));
  for (std::size_t i = 0; i < num_nodes; ++i) {
    std::vector<T> aggregate(d, T(0));
    for (std::size_t r = 0; r < topo.num_relations(); ++r) {
      std::vector<T> message_sum(d, T(0));
      std::size_t count = 0;
      for (std::size_t e = 0; e < topo.src[r].size(); ++e) {
        if (static_cast<std::size_t>(topo.dst[r][e]) != i) continue;
        const auto j = static_cast<std::size_t>(topo.src[r][e]);
        for (std::size_t c = 0; c < d; ++c) {
          for (std::size_t k = 0; k < d; ++k) {
            message_sum[c] += z[j * d + k] * w_rel[r][k * d + c];
          }
        }
        ++count;
      }
      if (count == 0) continue;
      for (std::size_t c = 0; c < d; ++c) {
        aggregate[c] += message_sum[c] / static_cast<T>(count);
      }
    }
    for (std::size_t c = 0; c < d; ++c) {
      const T normalized =
          (aggregate[c] - running_mean[c]) / std::sqrt(running_var[c] + eps);
      const T activated = gamma[c] * normalized + beta[c];
      const T rectified = activated > T(0) ? activated : T(0);
      T self_update = T(0);
      for (std::size_t k = 0; k < d; ++k) {
        self_update += z[i * d + k] * w_self[k * d + c];
      }
      out[i * d + c] = self_update + rectified;
    }
  }
  return out;
}

// Relabels atom nodes: atom i of the input becomes atom perm[i] of the
// output, with types, owners and all edge endpoints remapped consistently.
inline glyforge::HeteroGlycanGraph permute_atoms(const glyforge::HeteroGlycanGraph& g,
                                                 const std::vector<std::int32_t>& perm) {
  glyforge::HeteroGlycanGraph out;
  const std::size_t n = g.num_atoms();
  out.atom_types.resize(n);
  out.atom_owner.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto target = static_cast<std::size_t>(perm[i]);
    out.atom_types[target] = g.atom_types[i];
    out.atom_owner[target] = g.atom_owner[i];
  }
  out.mono_types = g.mono_types;
  out.e_aa.reserve(g.e_aa.size());
  for (const auto& e : g.e_aa) {
    out.e_aa.push_back({perm[static_cast<std::size_t>(e.src)],
                        perm[static_cast<std::size_t>(e.dst)], e.rel});
  }
  out.e_am.reserve(g.e_am.size());
  for (const auto& e : g.e_am) {
    if (e.rel == glyforge::kRelAtomToMono) {
      out.e_am.push_back({perm[static_cast<std::size_t>(e.src)], e.dst, e.rel});
    } else {
      out.e_am.push_back({e.src, perm[static_cast<std::size_t>(e.dst)], e.rel});
    }
  }
  out.e_mm = g.e_mm;
  return out;
}

}  // namespace glyforge_test
