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
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "glyforge/error.hpp"
#include "glyforge/notation.hpp"
#include "glyforge/templates.hpp"

namespace glyforge {

// Atom-monosaccharide membership relations: each atom and its owning
// residue are connected in both directions.
constexpr std::int32_t kRelAtomToMono = 0;
constexpr std::int32_t kRelMonoToAtom = 1;
constexpr std::size_t kNumAmRelations = 2;

// All-atom heterogeneous graph of one glycan. Atom nodes and mono nodes
// are indexed separately; each edge family carries its own relation ids.
// Within e_aa the relation is the bond type and both directions of a bond
// share it; within e_mm it is the linkage index times two plus direction.
struct HeteroGlycanGraph {
  struct Edge {
    std::int32_t src = 0;
    std::int32_t dst = 0;
    std::int32_t rel = 0;
  };

  std::vector<std::int32_t> atom_types;  // element ids, length N
  std::vector<std::int32_t> mono_types;  // residue ids, length M
  std::vector<std::int32_t> atom_owner;  // owning residue per atom, length N
  std::vector<Edge> e_aa;
  std::vector<Edge> e_am;
  std::vector<Edge> e_mm;

  std::size_t num_atoms() const { return atom_types.size(); }
  std::size_t num_monos() const { return mono_types.size(); }
};

inline std::int32_t bond_relation(BondType type) {
  return static_cast<std::int32_t>(type);
}

constexpr std::size_t kNumAaRelations = kNumBondTypes;

// Expands every residue of the tree into its atom template and wires the
// three edge families. Atom-atom bonds never cross residue boundaries;
// residue-residue edges follow the glycosidic linkages, child to parent on
// even relation ids and parent to child on odd ones.
inline HeteroGlycanGraph assemble_graph(const GlycanTree& tree, const MonoVocab& mono_vocab,
                                        const LinkageVocab& linkage_vocab,
                                        const AtomVocab& atom_vocab = AtomVocab{},
                                        TemplateMode mode = TemplateMode::strict) {
  validate(tree);
  HeteroGlycanGraph g;
  const std::size_t m = tree.nodes.size();
  g.mono_types.reserve(m);
  std::vector<std::int32_t> base(m, 0);
  for (std::size_t node = 0; node < m; ++node) {
    const std::string& name = tree.nodes[node].name;
    if (mode == TemplateMode::strict) {
      g.mono_types.push_back(mono_vocab.id_of(name));
    } else {
      const auto found = mono_vocab.find(name);
      g.mono_types.push_back(found ? *found : static_cast<int>(mono_vocab.unknown_id()));
    }
    const AtomTemplate& tmpl = template_for(name, mode);
    base[node] = static_cast<std::int32_t>(g.atom_types.size());
    for (const auto& symbol : tmpl.elements) {
      g.atom_types.push_back(atom_vocab.id_of(symbol));
      g.atom_owner.push_back(static_cast<std::int32_t>(node));
    }
    for (const auto& bond : tmpl.bonds) {
      const std::int32_t u = base[node] + bond.i;
      const std::int32_t v = base[node] + bond.j;
      g.e_aa.push_back({u, v, bond_relation(bond.type)});
      g.e_aa.push_back({v, u, bond_relation(bond.type)});
    }
  }
  const std::int32_t n = static_cast<std::int32_t>(g.atom_types.size());
  g.e_am.reserve(2 * static_cast<std::size_t>(n));
  for (std::int32_t atom = 0; atom < n; ++atom) {
    const std::int32_t owner = g.atom_owner[static_cast<std::size_t>(atom)];
    g.e_am.push_back({atom, owner, kRelAtomToMono});
    g.e_am.push_back({owner, atom, kRelMonoToAtom});
  }
  for (const auto& edge : tree.edges) {
    const int fwd = linkage_vocab.forward_relation(edge.linkage);
    const int rev = linkage_vocab.reverse_relation(edge.linkage);
    g.e_mm.push_back({edge.child, edge.parent, fwd});
    g.e_mm.push_back({edge.parent, edge.child, rev});
  }
  return g;
}

// Connected component count over the union of all edge families, with mono
// node ids offset behind the atoms.
inline std::size_t count_components(const HeteroGlycanGraph& g) {
  const std::size_t n = g.num_atoms();
  const std::size_t total = n + g.num_monos();
  if (total == 0) return 0;
  std::vector<std::size_t> parent(total);
  for (std::size_t i = 0; i < total; ++i) parent[i] = i;
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  auto unite = [&](std::size_t a, std::size_t b) {
    parent[find(a)] = find(b);
  };
  for (const auto& e : g.e_aa) unite(static_cast<std::size_t>(e.src), static_cast<std::size_t>(e.dst));
  for (const auto& e : g.e_am) {
    // e_am sources alternate between families; the atom endpoint is raw,
    // the mono endpoint is offset.
    if (e.rel == kRelAtomToMono) {
      unite(static_cast<std::size_t>(e.src), n + static_cast<std::size_t>(e.dst));
    } else {
      unite(n + static_cast<std::size_t>(e.src), static_cast<std::size_t>(e.dst));
    }
  }
  for (const auto& e : g.e_mm) {
    unite(n + static_cast<std::size_t>(e.src), n + static_cast<std::size_t>(e.dst));
  }
  std::size_t components = 0;
  for (std::size_t i = 0; i < total; ++i) {
    if (find(i) == i) ++components;
  }
  return components;
}

struct GraphStats {
  std::size_t num_atoms = 0;
  std::size_t num_monos = 0;
  std::size_t num_aa_edges = 0;
  std::size_t num_am_edges = 0;
  std::size_t num_mm_edges = 0;
  std::map<std::int32_t, std::size_t> aa_by_relation;
  std::map<std::int32_t, std::size_t> am_by_relation;
  std::map<std::int32_t, std::size_t> mm_by_relation;
};

inline GraphStats graph_stats(const HeteroGlycanGraph& g) {
  GraphStats s;
  s.num_atoms = g.num_atoms();
  s.num_monos = g.num_monos();
  s.num_aa_edges = g.e_aa.size();
  s.num_am_edges = g.e_am.size();
  s.num_mm_edges = g.e_mm.size();
  for (const auto& e : g.e_aa) ++s.aa_by_relation[e.rel];
  for (const auto& e : g.e_am) ++s.am_by_relation[e.rel];
  for (const auto& e : g.e_mm) ++s.mm_by_relation[e.rel];
  return s;
}

// JSON export of a graph, together with the relation id legend.
inline nlohmann::json graph_to_json(const HeteroGlycanGraph& g, const MonoVocab& mono_vocab,
                                    const LinkageVocab& linkage_vocab,
                                    const AtomVocab& atom_vocab = AtomVocab{}) {
  nlohmann::json out;
  out["atom_types"] = g.atom_types;
  out["mono_types"] = g.mono_types;
  out["atom_owner"] = g.atom_owner;
  auto edges_to_json = [](const std::vector<HeteroGlycanGraph::Edge>& edges) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& e : edges) rows.push_back({e.src, e.dst, e.rel});
    return rows;
  };
  out["e_aa"] = edges_to_json(g.e_aa);
  out["e_am"] = edges_to_json(g.e_am);
  out["e_mm"] = edges_to_json(g.e_mm);

  nlohmann::json relations;
  const char* bond_names[] = {"single", "double", "triple", "aromatic"};
  nlohmann::json aa;
  for (std::size_t t = 0; t < kNumBondTypes; ++t) {
    aa[std::to_string(t)] = bond_names[t];
  }
  relations["aa"] = aa;
  relations["am"] = {{"0", "atom_to_mono"}, {"1", "mono_to_atom"}};
  nlohmann::json mm;
  for (std::size_t i = 0; i < linkage_vocab.size(); ++i) {
    mm[std::to_string(2 * i)] = linkage_vocab.linkages[i].str() + ":child_to_parent";
    mm[std::to_string(2 * i + 1)] = linkage_vocab.linkages[i].str() + ":parent_to_child";
  }
  relations["mm"] = mm;
  out["relations"] = relations;
  out["atom_vocab"] = atom_vocab.elements;
  out["mono_vocab"] = mono_vocab.names;
  return out;
}

// Several graphs merged into one disjoint union, with bookkeeping that maps
// every node back to its source graph for segment pooling.
struct GraphBatch {
  HeteroGlycanGraph merged;
  std::vector<std::int32_t> atom_graph;  // source graph per atom node
  std::vector<std::int32_t> mono_graph;  // source graph per mono node
  std::int32_t num_graphs = 0;
};

inline GraphBatch batch_graphs(std::span<const HeteroGlycanGraph* const> graphs) {
  GraphBatch batch;
  batch.num_graphs = static_cast<std::int32_t>(graphs.size());
  std::int32_t atom_base = 0;
  std::int32_t mono_base = 0;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const HeteroGlycanGraph& g = *graphs[gi];
    const std::int32_t gid = static_cast<std::int32_t>(gi);
    auto& m = batch.merged;
    m.atom_types.insert(m.atom_types.end(), g.atom_types.begin(), g.atom_types.end());
    m.mono_types.insert(m.mono_types.end(), g.mono_types.begin(), g.mono_types.end());
    for (const auto owner : g.atom_owner) m.atom_owner.push_back(owner + mono_base);
    for (const auto& e : g.e_aa) m.e_aa.push_back({e.src + atom_base, e.dst + atom_base, e.rel});
    for (const auto& e : g.e_am) {
      if (e.rel == kRelAtomToMono) {
        m.e_am.push_back({e.src + atom_base, e.dst + mono_base, e.rel});
      } else {
        m.e_am.push_back({e.src + mono_base, e.dst + atom_base, e.rel});
      }
    }
    for (const auto& e : g.e_mm) m.e_mm.push_back({e.src + mono_base, e.dst + mono_base, e.rel});
    batch.atom_graph.insert(batch.atom_graph.end(), g.atom_types.size(), gid);
    batch.mono_graph.insert(batch.mono_graph.end(), g.mono_types.size(), gid);
    atom_base += static_cast<std::int32_t>(g.num_atoms());
    mono_base += static_cast<std::int32_t>(g.num_monos());
  }
  return batch;
}

inline GraphBatch batch_graphs(std::span<const HeteroGlycanGraph> graphs) {
  std::vector<const HeteroGlycanGraph*> ptrs;
  ptrs.reserve(graphs.size());
  for (const auto& g : graphs) ptrs.push_back(&g);
  return batch_graphs(std::span<const HeteroGlycanGraph* const>(ptrs));
}

}  // namespace glyforge
