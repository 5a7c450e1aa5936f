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

#include <map>
#include <string>
#include <vector>

#include "glyforge/error.hpp"

namespace glyforge {

// Bond order classes for atom-atom edges. Each class owns two directional
// relation ids in the encoder.
enum class BondType : int { Single = 0, Double = 1, Triple = 2, Aromatic = 3 };

constexpr std::size_t kNumBondTypes = 4;

// Fixed element vocabulary for atom nodes. The trailing entry doubles as
// the mask used during pre-training.
struct AtomVocab {
  static constexpr const char* mask_name = "Unknown-Atom";

  std::vector<std::string> elements = {"C", "N", "O", "S", "P", mask_name};

  std::size_t size() const { return elements.size(); }
  std::size_t unknown_id() const { return elements.size() - 1; }

  int id_of(const std::string& symbol) const {
    for (std::size_t i = 0; i < elements.size(); ++i) {
      if (elements[i] == symbol) return static_cast<int>(i);
    }
    throw VocabError("unknown element symbol: " + symbol);
  }
};

// Heavy atom skeleton of one residue: hydrogens are omitted, atom labels
// follow carbohydrate numbering and exist for auditing. The full adjacency
// tables are reproduced in docs/monosaccharide_templates.md.
struct AtomTemplate {
  struct Bond {
    int i = 0;
    int j = 0;
    BondType type = BondType::Single;
  };

  std::vector<std::string> labels;
  std::vector<std::string> elements;
  std::vector<Bond> bonds;

  std::size_t num_atoms() const { return labels.size(); }
};

namespace detail {

class TemplateBuilder {
 public:
  // The element is the leading letter of the label: C1 is carbon, O5 is
  // oxygen, N5 is nitrogen.
  TemplateBuilder& atom(const std::string& label) {
    index_[label] = static_cast<int>(tmpl_.labels.size());
    tmpl_.labels.push_back(label);
    tmpl_.elements.push_back(std::string(1, label[0]));
    return *this;
  }

  TemplateBuilder& bond(const std::string& a, const std::string& b,
                        BondType type = BondType::Single) {
    tmpl_.bonds.push_back({index_.at(a), index_.at(b), type});
    return *this;
  }

  AtomTemplate build() const { return tmpl_; }

 private:
  AtomTemplate tmpl_;
  std::map<std::string, int> index_;
};

// Hexopyranose core: 6 carbons, 6 oxygens, one ring. 12 atoms, 12 bonds.
inline AtomTemplate hexopyranose() {
  TemplateBuilder b;
  for (const char* label : {"C1", "C2", "C3", "C4", "C5", "C6"}) b.atom(label);
  for (const char* label : {"O1", "O2", "O3", "O4", "O5", "O6"}) b.atom(label);
  b.bond("C1", "C2").bond("C2", "C3").bond("C3", "C4").bond("C4", "C5");
  b.bond("C5", "O5").bond("O5", "C1");
  b.bond("C1", "O1").bond("C2", "O2").bond("C3", "O3").bond("C4", "O4");
  b.bond("C5", "C6").bond("C6", "O6");
  return b.build();
}

// 2-acetamido hexopyranose: the C2 hydroxyl is replaced by an N-acetyl
// group. 15 atoms, 15 bonds, one C=O.
inline AtomTemplate hexnac() {
  TemplateBuilder b;
  for (const char* label : {"C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8"}) b.atom(label);
  for (const char* label : {"O1", "O3", "O4", "O5", "O6", "O7"}) b.atom(label);
  b.atom("N2");
  b.bond("C1", "C2").bond("C2", "C3").bond("C3", "C4").bond("C4", "C5");
  b.bond("C5", "O5").bond("O5", "C1");
  b.bond("C1", "O1").bond("C3", "O3").bond("C4", "O4");
  b.bond("C5", "C6").bond("C6", "O6");
  b.bond("C2", "N2").bond("N2", "C7").bond("C7", "O7", BondType::Double).bond("C7", "C8");
  return b.build();
}

// 6-deoxy hexopyranose: C6 is a methyl carbon with no oxygen. 11 atoms,
// 11 bonds.
inline AtomTemplate deoxyhexose() {
  TemplateBuilder b;
  for (const char* label : {"C1", "C2", "C3", "C4", "C5", "C6"}) b.atom(label);
  for (const char* label : {"O1", "O2", "O3", "O4", "O5"}) b.atom(label);
  b.bond("C1", "C2").bond("C2", "C3").bond("C3", "C4").bond("C4", "C5");
  b.bond("C5", "O5").bond("O5", "C1");
  b.bond("C1", "O1").bond("C2", "O2").bond("C3", "O3").bond("C4", "O4");
  b.bond("C5", "C6");
  return b.build();
}

// Pentopyranose: five carbons in a six membered ring. 10 atoms, 10 bonds.
inline AtomTemplate pentopyranose() {
  TemplateBuilder b;
  for (const char* label : {"C1", "C2", "C3", "C4", "C5"}) b.atom(label);
  for (const char* label : {"O1", "O2", "O3", "O4", "O5"}) b.atom(label);
  b.bond("C1", "C2").bond("C2", "C3").bond("C3", "C4").bond("C4", "C5");
  b.bond("C5", "O5").bond("O5", "C1");
  b.bond("C1", "O1").bond("C2", "O2").bond("C3", "O3").bond("C4", "O4");
  return b.build();
}

// Hexuronic acid: hexopyranose whose C6 is a carboxyl group. 13 atoms,
// 13 bonds, one C=O.
inline AtomTemplate hexuronic() {
  TemplateBuilder b;
  for (const char* label : {"C1", "C2", "C3", "C4", "C5", "C6"}) b.atom(label);
  for (const char* label : {"O1", "O2", "O3", "O4", "O5", "O6a", "O6b"}) b.atom(label);
  b.bond("C1", "C2").bond("C2", "C3").bond("C3", "C4").bond("C4", "C5");
  b.bond("C5", "O5").bond("O5", "C1");
  b.bond("C1", "O1").bond("C2", "O2").bond("C3", "O3").bond("C4", "O4");
  b.bond("C5", "C6").bond("C6", "O6a", BondType::Double).bond("C6", "O6b");
  return b.build();
}

enum class NonuloseKind { plain, acetyl, glycolyl };

// Nine carbon keto acid core shared by sialic acids: ring C2..C6 plus O6,
// a C1 carboxyl on C2, a deoxy C3, and a C7-C8-C9 glycerol tail. The C5
// position carries a hydroxyl (plain, 18/18), an N-acetyl (21/21, two C=O)
// or an N-glycolyl group (22/22).
inline AtomTemplate nonulosonic(NonuloseKind kind) {
  TemplateBuilder b;
  for (const char* label : {"C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9"}) b.atom(label);
  for (const char* label : {"O1a", "O1b", "O2", "O4", "O6", "O7", "O8", "O9"}) b.atom(label);
  b.bond("C2", "C3").bond("C3", "C4").bond("C4", "C5").bond("C5", "C6");
  b.bond("C6", "O6").bond("O6", "C2");
  b.bond("C2", "C1").bond("C1", "O1a", BondType::Double).bond("C1", "O1b");
  b.bond("C2", "O2").bond("C4", "O4");
  b.bond("C6", "C7").bond("C7", "O7").bond("C7", "C8").bond("C8", "O8");
  b.bond("C8", "C9").bond("C9", "O9");
  if (kind == NonuloseKind::plain) {
    b.atom("O5").bond("C5", "O5");
  } else {
    b.atom("N5").atom("C10").atom("O10").atom("C11");
    b.bond("C5", "N5").bond("N5", "C10").bond("C10", "O10", BondType::Double).bond("C10", "C11");
    if (kind == NonuloseKind::glycolyl) {
      b.atom("O11").bond("C11", "O11");
    }
  }
  return b.build();
}

inline const std::map<std::string, AtomTemplate>& template_table() {
  static const std::map<std::string, AtomTemplate> table = [] {
    std::map<std::string, AtomTemplate> t;
    const AtomTemplate hex = hexopyranose();
    t["Glc"] = hex;
    t["Gal"] = hex;
    t["Man"] = hex;
    t["All"] = hex;
    const AtomTemplate nac = hexnac();
    t["GlcNAc"] = nac;
    t["GalNAc"] = nac;
    const AtomTemplate deoxy = deoxyhexose();
    t["Fuc"] = deoxy;
    t["Rha"] = deoxy;
    const AtomTemplate pent = pentopyranose();
    t["Xyl"] = pent;
    t["Ara"] = pent;
    t["Lyx"] = pent;
    const AtomTemplate uronic = hexuronic();
    t["GlcA"] = uronic;
    t["IdoA"] = uronic;
    t["GalA"] = uronic;
    t["Neu5Ac"] = nonulosonic(NonuloseKind::acetyl);
    t["Neu5Gc"] = nonulosonic(NonuloseKind::glycolyl);
    t["Kdn"] = nonulosonic(NonuloseKind::plain);
    return t;
  }();
  return table;
}

}  // namespace detail

// Strict mode rejects residues without a curated template; lenient mode
// substitutes the generic hexopyranose skeleton.
enum class TemplateMode { strict, lenient };

inline bool has_template(const std::string& name) {
  return detail::template_table().count(name) > 0;
}

inline std::vector<std::string> known_template_names() {
  std::vector<std::string> names;
  for (const auto& entry : detail::template_table()) names.push_back(entry.first);
  return names;
}

inline const AtomTemplate& template_for(const std::string& name,
                                        TemplateMode mode = TemplateMode::strict) {
  const auto& table = detail::template_table();
  const auto it = table.find(name);
  if (it != table.end()) return it->second;
  if (mode == TemplateMode::lenient) {
    static const AtomTemplate generic = detail::hexopyranose();
    return generic;
  }
  throw VocabError("no atom template for monosaccharide: " + name);
}

}  // namespace glyforge
