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

#include "glyforge/structgraph.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "glyforge/notation.hpp"
#include "glyforge/templates.hpp"

namespace glyforge {
namespace {

struct VocabFixture {
  MonoVocab mono;
  LinkageVocab linkage;

  explicit VocabFixture(const std::vector<std::string>& corpus) {
    std::vector<GlycanTree> trees;
    for (const auto& text : corpus) trees.push_back(parse_glycan(text));
    auto built = build_vocabularies(trees);
    mono = std::move(built.first);
    linkage = std::move(built.second);
  }
};

TEST(Templates, AtomAndBondCounts) {
  struct Expected {
    const char* name;
    std::size_t atoms;
    std::size_t bonds;
    std::size_t carbons;
    std::size_t oxygens;
    std::size_t nitrogens;
    std::size_t doubles;
  };
  const Expected table[] = {
      {"Glc", 12, 12, 6, 6, 0, 0},    {"Gal", 12, 12, 6, 6, 0, 0},
      {"Man", 12, 12, 6, 6, 0, 0},    {"GlcNAc", 15, 15, 8, 6, 1, 1},
      {"GalNAc", 15, 15, 8, 6, 1, 1}, {"Fuc", 11, 11, 6, 5, 0, 0},
      {"Rha", 11, 11, 6, 5, 0, 0},    {"Xyl", 10, 10, 5, 5, 0, 0},
      {"Ara", 10, 10, 5, 5, 0, 0},    {"GlcA", 13, 13, 6, 7, 0, 1},
      {"IdoA", 13, 13, 6, 7, 0, 1},   {"GalA", 13, 13, 6, 7, 0, 1},
      {"Neu5Ac", 21, 21, 11, 9, 1, 2}, {"Neu5Gc", 22, 22, 11, 10, 1, 2},
      {"Kdn", 18, 18, 9, 9, 0, 1},
  };
  for (const auto& e : table) {
    const AtomTemplate& t = template_for(e.name);
    EXPECT_EQ(t.num_atoms(), e.atoms) << e.name;
    EXPECT_EQ(t.bonds.size(), e.bonds) << e.name;
    std::size_t c = 0, o = 0, n = 0, doubles = 0;
    for (const auto& symbol : t.elements) {
      if (symbol == "C") ++c;
      if (symbol == "O") ++o;
      if (symbol == "N") ++n;
    }
    for (const auto& b : t.bonds) {
      if (b.type == BondType::Double) ++doubles;
    }
    EXPECT_EQ(c, e.carbons) << e.name;
    EXPECT_EQ(o, e.oxygens) << e.name;
    EXPECT_EQ(n, e.nitrogens) << e.name;
    EXPECT_EQ(doubles, e.doubles) << e.name;
  }
  EXPECT_GE(known_template_names().size(), 15u);
}

TEST(Templates, SkeletonsAreSaneAndConnected) {
  for (const auto& name : known_template_names()) {
    const AtomTemplate& t = template_for(name);
    const std::size_t n = t.num_atoms();
    std::set<std::pair<int, int>> seen;
    std::vector<int> degree(n, 0);
    std::vector<std::size_t> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
    auto find = [&parent](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& b : t.bonds) {
      ASSERT_GE(b.i, 0);
      ASSERT_LT(static_cast<std::size_t>(b.i), n) << name;
      ASSERT_LT(static_cast<std::size_t>(b.j), n) << name;
      EXPECT_NE(b.i, b.j) << name << " has a self bond";
      const auto key = std::minmax(b.i, b.j);
      EXPECT_TRUE(seen.insert(key).second) << name << " duplicates a bond";
      ++degree[static_cast<std::size_t>(b.i)];
      ++degree[static_cast<std::size_t>(b.j)];
      parent[find(static_cast<std::size_t>(b.i))] = find(static_cast<std::size_t>(b.j));
    }
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_GE(degree[i], 1) << name << " atom " << t.labels[i] << " is isolated";
    }
    std::size_t roots = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (find(i) == i) ++roots;
    }
    EXPECT_EQ(roots, 1u) << name << " skeleton is not connected";
    // Labels are unique and their leading letter matches the element.
    std::set<std::string> labels(t.labels.begin(), t.labels.end());
    EXPECT_EQ(labels.size(), n) << name;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(t.labels[i].substr(0, 1), t.elements[i]) << name;
    }
  }
}

TEST(Assemble, LactoseCounts) {
  VocabFixture v({"Gal(b1-4)Glc"});
  const auto g = assemble_graph(parse_glycan("Gal(b1-4)Glc"), v.mono, v.linkage);
  EXPECT_EQ(g.num_atoms(), 24u);
  EXPECT_EQ(g.num_monos(), 2u);
  EXPECT_EQ(g.e_aa.size(), 48u);  // 12 bonds per residue, both directions
  EXPECT_EQ(g.e_am.size(), 48u);  // two membership edges per atom
  EXPECT_EQ(g.e_mm.size(), 2u);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(g.atom_owner[i], 0);
  for (std::size_t i = 12; i < 24; ++i) EXPECT_EQ(g.atom_owner[i], 1);
  EXPECT_EQ(g.mono_types[0], v.mono.id_of("Gal"));
  EXPECT_EQ(g.mono_types[1], v.mono.id_of("Glc"));

  LinkageType b14{'b', '1', '4'};
  // Child to parent on the even relation, parent to child on the odd one.
  EXPECT_EQ(g.e_mm[0].src, 0);
  EXPECT_EQ(g.e_mm[0].dst, 1);
  EXPECT_EQ(g.e_mm[0].rel, v.linkage.forward_relation(b14));
  EXPECT_EQ(g.e_mm[1].src, 1);
  EXPECT_EQ(g.e_mm[1].dst, 0);
  EXPECT_EQ(g.e_mm[1].rel, v.linkage.reverse_relation(b14));
  EXPECT_EQ(g.e_mm[0].rel % 2, 0);
  EXPECT_EQ(g.e_mm[1].rel % 2, 1);
}

TEST(Assemble, EdgeLawsHold) {
  const std::vector<std::string> corpus = {
      "Neu5Ac(a2-3)Gal(b1-4)[Fuc(a1-3)]GlcNAc(b1-2)Man",
      "Man(a1-3)[Man(a1-6)]Man(b1-4)GlcNAc(b1-4)GlcNAc",
      "GlcA(b1-3)Gal(b1-3)Gal(b1-4)Xyl",
      "Kdn(a2-3)Gal(b1-4)Glc",
      "Neu5Gc(a2-6)GalNAc",
  };
  VocabFixture v(corpus);
  for (const auto& text : corpus) {
    const auto tree = parse_glycan(text);
    const auto g = assemble_graph(tree, v.mono, v.linkage);
    std::size_t expected_atoms = 0;
    std::size_t expected_bonds = 0;
    for (const auto& node : tree.nodes) {
      expected_atoms += template_for(node.name).num_atoms();
      expected_bonds += template_for(node.name).bonds.size();
    }
    EXPECT_EQ(g.num_atoms(), expected_atoms) << text;
    EXPECT_EQ(g.e_aa.size(), 2 * expected_bonds) << text;
    EXPECT_EQ(g.e_am.size(), 2 * g.num_atoms()) << text;
    EXPECT_EQ(g.e_mm.size(), 2 * (g.num_monos() - 1)) << text;
    // Bonds stay inside their residue.
    for (const auto& e : g.e_aa) {
      EXPECT_EQ(g.atom_owner[static_cast<std::size_t>(e.src)],
                g.atom_owner[static_cast<std::size_t>(e.dst)])
          << text;
    }
    EXPECT_EQ(count_components(g), 1u) << text;
    // Bond edges are symmetric: both directions carry the same relation id.
    std::set<std::tuple<std::int32_t, std::int32_t, std::int32_t>> aa_set;
    for (const auto& e : g.e_aa) {
      EXPECT_GE(e.rel, 0) << text;
      EXPECT_LT(e.rel, static_cast<std::int32_t>(kNumAaRelations)) << text;
      aa_set.insert({e.src, e.dst, e.rel});
    }
    for (const auto& e : g.e_aa) {
      EXPECT_TRUE(aa_set.count({e.dst, e.src, e.rel})) << text;
    }
    // Linkage relations come in forward and reverse pairs of equal size.
    const auto stats = graph_stats(g);
    for (const auto& [rel, count] : stats.mm_by_relation) {
      const std::int32_t partner = rel % 2 == 0 ? rel + 1 : rel - 1;
      ASSERT_TRUE(stats.mm_by_relation.count(partner)) << text;
      EXPECT_EQ(stats.mm_by_relation.at(partner), count) << text;
    }
  }
}

TEST(Assemble, MembershipEdgesMatchOwners) {
  VocabFixture v({"Man(a1-3)[Man(a1-6)]Man"});
  const auto g = assemble_graph(parse_glycan("Man(a1-3)[Man(a1-6)]Man"), v.mono, v.linkage);
  std::size_t to_mono = 0;
  std::size_t to_atom = 0;
  for (const auto& e : g.e_am) {
    if (e.rel == kRelAtomToMono) {
      ++to_mono;
      EXPECT_EQ(g.atom_owner[static_cast<std::size_t>(e.src)], e.dst);
    } else {
      ASSERT_EQ(e.rel, kRelMonoToAtom);
      ++to_atom;
      EXPECT_EQ(g.atom_owner[static_cast<std::size_t>(e.dst)], e.src);
    }
  }
  EXPECT_EQ(to_mono, g.num_atoms());
  EXPECT_EQ(to_atom, g.num_atoms());
}

TEST(Assemble, StrictModeRejectsUnknownNames) {
  // "Qux" parses fine and lands in the vocabulary, but no template exists.
  VocabFixture v({"Qux(b1-4)Glc"});
  const auto tree = parse_glycan("Qux(b1-4)Glc");
  EXPECT_THROW(assemble_graph(tree, v.mono, v.linkage), VocabError);
  const auto g = assemble_graph(tree, v.mono, v.linkage, AtomVocab{}, TemplateMode::lenient);
  // Lenient mode substitutes the generic hexopyranose skeleton.
  EXPECT_EQ(g.num_atoms(), 24u);
  EXPECT_EQ(g.mono_types[0], v.mono.id_of("Qux"));
}

TEST(Assemble, LenientModeMapsMissingVocabToUnknown) {
  VocabFixture v({"Gal(b1-4)Glc"});
  const auto tree = parse_glycan("Fuc(b1-4)Glc");
  EXPECT_THROW(assemble_graph(tree, v.mono, v.linkage), VocabError);
  const auto g = assemble_graph(tree, v.mono, v.linkage, AtomVocab{}, TemplateMode::lenient);
  EXPECT_EQ(g.mono_types[0], static_cast<std::int32_t>(v.mono.unknown_id()));
}

TEST(Assemble, UnknownLinkageIsAlwaysRejected) {
  VocabFixture v({"Gal(b1-4)Glc"});
  const auto tree = parse_glycan("Gal(a1-2)Glc");
  EXPECT_THROW(assemble_graph(tree, v.mono, v.linkage), VocabError);
  EXPECT_THROW(assemble_graph(tree, v.mono, v.linkage, AtomVocab{}, TemplateMode::lenient),
               VocabError);
}

TEST(Components, DetectsDisconnectedPieces) {
  VocabFixture v({"Gal(b1-4)Glc"});
  auto g = assemble_graph(parse_glycan("Gal(b1-4)Glc"), v.mono, v.linkage);
  EXPECT_EQ(count_components(g), 1u);
  // An orphan residue with no membership or linkage edges forms its own
  // component.
  g.mono_types.push_back(g.mono_types[0]);
  EXPECT_EQ(count_components(g), 2u);
}

TEST(Export, JsonHoldsAllSections) {
  VocabFixture v({"Gal(b1-4)Glc"});
  const auto g = assemble_graph(parse_glycan("Gal(b1-4)Glc"), v.mono, v.linkage);
  const auto j = graph_to_json(g, v.mono, v.linkage);
  EXPECT_EQ(j["atom_types"].size(), 24u);
  EXPECT_EQ(j["mono_types"].size(), 2u);
  EXPECT_EQ(j["atom_owner"].size(), 24u);
  EXPECT_EQ(j["e_aa"].size(), 48u);
  EXPECT_EQ(j["e_am"].size(), 48u);
  EXPECT_EQ(j["e_mm"].size(), 2u);
  ASSERT_TRUE(j["e_mm"][0].is_array());
  EXPECT_EQ(j["e_mm"][0].size(), 3u);
  EXPECT_EQ(j["relations"]["aa"].size(), 4u);
  EXPECT_EQ(j["relations"]["am"].size(), 2u);
  EXPECT_EQ(j["relations"]["mm"].size(), 2u * v.linkage.size());
  EXPECT_EQ(j["atom_vocab"].size(), 6u);
  EXPECT_EQ(j["mono_vocab"].size(), v.mono.names.size());
}

TEST(Batch, OffsetsAreConsistent) {
  VocabFixture v({"Gal(b1-4)Glc", "Man(a1-3)[Man(a1-6)]Man"});
  std::vector<HeteroGlycanGraph> graphs = {
      assemble_graph(parse_glycan("Gal(b1-4)Glc"), v.mono, v.linkage),
      assemble_graph(parse_glycan("Man(a1-3)[Man(a1-6)]Man"), v.mono, v.linkage),
  };
  const auto batch = batch_graphs(std::span<const HeteroGlycanGraph>(graphs));
  EXPECT_EQ(batch.num_graphs, 2);
  EXPECT_EQ(batch.merged.num_atoms(), graphs[0].num_atoms() + graphs[1].num_atoms());
  EXPECT_EQ(batch.merged.num_monos(), 5u);
  EXPECT_EQ(batch.atom_graph.size(), batch.merged.num_atoms());
  EXPECT_EQ(batch.mono_graph.size(), 5u);
  EXPECT_EQ(batch.atom_graph.front(), 0);
  EXPECT_EQ(batch.atom_graph.back(), 1);
  // Edges of the second graph are shifted by the first graph's node counts.
  const std::int32_t atom_base = static_cast<std::int32_t>(graphs[0].num_atoms());
  const std::int32_t mono_base = 2;
  const auto& first_aa_of_second = batch.merged.e_aa[graphs[0].e_aa.size()];
  EXPECT_EQ(first_aa_of_second.src, graphs[1].e_aa[0].src + atom_base);
  EXPECT_EQ(first_aa_of_second.dst, graphs[1].e_aa[0].dst + atom_base);
  const auto& first_mm_of_second = batch.merged.e_mm[graphs[0].e_mm.size()];
  EXPECT_EQ(first_mm_of_second.src, graphs[1].e_mm[0].src + mono_base);
  EXPECT_EQ(first_mm_of_second.dst, graphs[1].e_mm[0].dst + mono_base);
  // Membership edges keep atoms raw and monos offset on either endpoint.
  const auto& first_am_of_second = batch.merged.e_am[graphs[0].e_am.size()];
  ASSERT_EQ(first_am_of_second.rel, kRelAtomToMono);
  EXPECT_EQ(first_am_of_second.src, graphs[1].e_am[0].src + atom_base);
  EXPECT_EQ(first_am_of_second.dst, graphs[1].e_am[0].dst + mono_base);
  // Owners in the merged graph point at merged mono ids.
  for (std::size_t a = 0; a < batch.merged.num_atoms(); ++a) {
    EXPECT_EQ(batch.mono_graph[static_cast<std::size_t>(
                  batch.merged.atom_owner[a])],
              batch.atom_graph[a]);
  }
  EXPECT_EQ(count_components(batch.merged), 2u);
}

}  // namespace
}  // namespace glyforge
