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

// Dataset plumbing: record analysis and the three-stage curation filter
// (quality, then integrity, then leakage), deterministic train/valid/test
// splitting, labeled-dataset and protein-embedding ingestion, graph
// representation export, and synthetic corpus generators for self-contained
// experiments.

#ifndef GLYFORGE_DATAKIT_HPP_
#define GLYFORGE_DATAKIT_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "glyforge/encoder.hpp"
#include "glyforge/error.hpp"
#include "glyforge/io.hpp"
#include "glyforge/notation.hpp"
#include "glyforge/rng.hpp"
#include "glyforge/structgraph.hpp"
#include "glyforge/tasks.hpp"
#include "glyforge/templates.hpp"

namespace glyforge {

// Split ratios that are negative or do not sum to one.
class BadRatiosError : public Error {
 public:
  using Error::Error;
};

// One ingested structure plus everything curation needs to judge it. The
// grammar cannot express disconnected structures, so the component count is
// carried as a record-level field from ingestion (default 1).
struct GlycanRecord {
  std::string raw;
  int components = 1;
  bool parsed = false;
  std::string parse_error;  // only when !parsed
  std::string canonical;    // only when parsed
  bool fully_solved = false;

  bool single_component() const { return components == 1; }
};

// Parses and classifies one raw structure string. A record is fully solved
// when it parses, every linkage is completely specified (no '?' fields), and
// every residue has a curated atom template.
inline GlycanRecord analyze_record(const std::string& text, int components = 1) {
  GlycanRecord record;
  record.raw = text;
  record.components = components;
  try {
    const auto tree = parse_glycan(text);
    record.parsed = true;
    record.canonical = canonicalize(tree);
    record.fully_solved = true;
    for (const auto& edge : tree.edges) {
      if (!edge.linkage.fully_determined()) {
        record.fully_solved = false;
        break;
      }
    }
    if (record.fully_solved) {
      for (const auto& node : tree.nodes) {
        if (!has_template(node.name)) {
          record.fully_solved = false;
          break;
        }
      }
    }
  } catch (const ParseError& error) {
    record.parsed = false;
    record.parse_error = error.what();
  }
  return record;
}

// Reads curation input: JSON lines with "glycan" and an optional
// ingestion-supplied "components" count.
inline std::vector<GlycanRecord> read_glycan_records(const std::string& path) {
  std::vector<GlycanRecord> records;
  for (const auto& row : read_jsonl(path)) {
    if (!row.contains("glycan") || !row.at("glycan").is_string()) {
      throw DataError(path + ": record is missing a \"glycan\" string");
    }
    int components = 1;
    if (row.contains("components")) {
      components = row.at("components").get<int>();
      if (components < 1) throw DataError(path + ": component count must be at least 1");
    }
    records.push_back(analyze_record(row.at("glycan").get<std::string>(), components));
  }
  return records;
}

struct CurationReport {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t rejected_quality = 0;
  std::size_t rejected_integrity = 0;
  std::size_t rejected_leakage = 0;

  Json to_json() const {
    return Json{{"input", input},
                {"kept", kept},
                {"rejected_quality", rejected_quality},
                {"rejected_integrity", rejected_integrity},
                {"rejected_leakage", rejected_leakage}};
  }
};

struct CurationResult {
  std::vector<GlycanRecord> kept;
  CurationReport report;
};

// Filters records in three ordered stages: quality (must parse and be fully
// solved), integrity (must be a single component), and leakage (canonical
// form must not appear in any downstream set). A record is charged to the
// first stage it fails.
inline CurationResult curate(std::span<const GlycanRecord> records,
                             std::span<const std::unordered_set<std::string>> downstream_sets) {
  CurationResult result;
  result.report.input = records.size();
  for (const auto& record : records) {
    if (!record.parsed || !record.fully_solved) {
      ++result.report.rejected_quality;
      continue;
    }
    if (!record.single_component()) {
      ++result.report.rejected_integrity;
      continue;
    }
    bool leaked = false;
    for (const auto& set : downstream_sets) {
      if (set.count(record.canonical)) {
        leaked = true;
        break;
      }
    }
    if (leaked) {
      ++result.report.rejected_leakage;
      continue;
    }
    result.kept.push_back(record);
  }
  result.report.kept = result.kept.size();
  return result;
}

// Collects the canonical forms of every parseable "glycan" field in a
// JSON-lines dataset, for use as a curation leakage set.
inline std::unordered_set<std::string> canonical_set_from_jsonl(const std::string& path) {
  std::unordered_set<std::string> out;
  for (const auto& row : read_jsonl(path)) {
    if (!row.contains("glycan") || !row.at("glycan").is_string()) {
      throw DataError(path + ": record is missing a \"glycan\" string");
    }
    out.insert(canonicalize(row.at("glycan").get<std::string>()));
  }
  return out;
}

struct SplitAssignment {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
};

// Deterministic split: indices are shuffled by the seed, then dealt into
// train/valid/test with sizes floor(n * ratio) plus one extra each, in
// descending order of fractional remainder (ties resolved train, valid,
// test), until every record is assigned.
inline SplitAssignment split_dataset(std::size_t count, std::array<double, 3> ratios,
                                     std::uint64_t seed) {
  double sum = 0.0;
  for (const double r : ratios) {
    if (r < 0.0) throw BadRatiosError("split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw BadRatiosError("split ratios must sum to 1");

  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> fractions{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = ratios[k] * static_cast<double>(count);
    sizes[k] = static_cast<std::size_t>(std::floor(exact));
    fractions[k] = exact - std::floor(exact);
    assigned += sizes[k];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fractions[a] > fractions[b]; });
  for (std::size_t k = 0; assigned < count; ++k, ++assigned) sizes[order[k % 3]] += 1;

  std::vector<std::size_t> shuffled(count);
  std::iota(shuffled.begin(), shuffled.end(), 0u);
  Rng rng(seed);
  rng.shuffle(shuffled);

  SplitAssignment out;
  out.train.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(sizes[0]));
  out.valid.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(sizes[0]),
                   shuffled.begin() + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]));
  out.test.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]),
                  shuffled.end());
  return out;
}

// Protein partners: JSON lines of {"id", "vector"} with one uniform vector
// width and finite values throughout.
template <class T = float>
std::map<std::string, std::vector<T>> read_protein_embeddings(const std::string& path) {
  std::map<std::string, std::vector<T>> out;
  std::size_t width = 0;
  for (const auto& row : read_jsonl(path)) {
    if (!row.contains("id") || !row.at("id").is_string() || !row.contains("vector") ||
        !row.at("vector").is_array()) {
      throw DataError(path + ": protein rows need an \"id\" string and a \"vector\" array");
    }
    const auto id = row.at("id").get<std::string>();
    if (out.count(id)) throw DataError(path + ": duplicate protein id " + id);
    std::vector<T> vec;
    for (const auto& v : row.at("vector")) {
      if (!v.is_number()) throw DataError(path + ": protein vectors must be numeric");
      const double value = v.get<double>();
      if (!std::isfinite(value)) throw DataError(path + ": protein vectors must be finite");
      vec.push_back(static_cast<T>(value));
    }
    if (vec.empty()) throw DataError(path + ": protein vector for " + id + " is empty");
    if (width == 0) width = vec.size();
    if (vec.size() != width) {
      throw DataError(path + ": protein vector widths disagree (" + std::to_string(width) +
                      " vs " + std::to_string(vec.size()) + " for " + id + ")");
    }
    out.emplace(id, std::move(vec));
  }
  return out;
}

template <class T = float>
struct LoadedTaskDataset {
  TaskDataset<T> data;
  MonoVocab mono;
  LinkageVocab linkage;
  AtomVocab atom;
  bool interaction = false;
  std::size_t unknown_mono_residues = 0;  // residues mapped to the unknown id
};

namespace detail {

struct RawTaskRow {
  GlycanTree tree;
  std::string canonical;
  double label = 0.0;
  std::string protein_id;
  std::string split;
};

inline std::vector<RawTaskRow> read_task_rows(const std::string& path, bool* any_protein) {
  std::vector<RawTaskRow> rows;
  *any_protein = false;
  bool all_protein = true;
  for (const auto& row : read_jsonl(path)) {
    if (!row.contains("glycan") || !row.at("glycan").is_string()) {
      throw DataError(path + ": record is missing a \"glycan\" string");
    }
    if (!row.contains("label") || !row.at("label").is_number()) {
      throw DataError(path + ": record is missing a numeric \"label\"");
    }
    if (!row.contains("split") || !row.at("split").is_string()) {
      throw DataError(path + ": record is missing a \"split\" string");
    }
    RawTaskRow out;
    out.tree = parse_glycan(row.at("glycan").get<std::string>());
    out.canonical = canonicalize(out.tree);
    out.label = row.at("label").get<double>();
    out.split = row.at("split").get<std::string>();
    if (out.split != "train" && out.split != "valid" && out.split != "test") {
      throw DataError(path + ": split must be train, valid, or test, saw \"" + out.split + "\"");
    }
    if (row.contains("protein_id")) {
      out.protein_id = row.at("protein_id").get<std::string>();
      *any_protein = true;
    } else {
      all_protein = false;
    }
    rows.push_back(std::move(out));
  }
  if (rows.empty()) throw DataError(path + ": dataset has no records");
  if (*any_protein && !all_protein) {
    throw DataError(path + ": either every record names a protein_id or none does");
  }
  return rows;
}

template <class T>
LoadedTaskDataset<T> build_task_dataset(const std::string& path,
                                        const std::vector<RawTaskRow>& rows,
                                        bool any_protein, const std::string& protein_path,
                                        MonoVocab mono, LinkageVocab linkage,
                                        TemplateMode mode) {
  LoadedTaskDataset<T> out;
  out.mono = std::move(mono);
  out.linkage = std::move(linkage);
  out.interaction = any_protein;

  std::map<std::string, std::vector<T>> proteins;
  if (any_protein) {
    if (protein_path.empty()) {
      throw DataError(path + ": records name protein ids but no embedding file was given");
    }
    proteins = read_protein_embeddings<T>(protein_path);
    if (proteins.empty()) throw DataError(protein_path + ": embedding file has no rows");
    out.data.protein_dim = proteins.begin()->second.size();
  }

  for (const auto& row : rows) {
    auto graph = assemble_graph(row.tree, out.mono, out.linkage, out.atom, mode);
    for (const auto type : graph.mono_types) {
      if (type == static_cast<std::int32_t>(out.mono.unknown_id())) ++out.unknown_mono_residues;
    }
    TaskSplit<T>* split = row.split == "train" ? &out.data.train
                          : row.split == "valid" ? &out.data.valid
                                                 : &out.data.test;
    split->graphs.push_back(std::move(graph));
    split->canonical.push_back(row.canonical);
    split->labels.push_back(row.label);
    if (any_protein) {
      const auto it = proteins.find(row.protein_id);
      if (it == proteins.end()) {
        throw DataError(path + ": protein id \"" + row.protein_id +
                        "\" is missing from the embedding file");
      }
      split->proteins.push_back(it->second);
    }
  }
  if (out.unknown_mono_residues > 0) {
    std::fprintf(stderr,
                 "warning: %zu residues were outside the model vocabulary and were "
                 "mapped to the unknown type\n",
                 out.unknown_mono_residues);
  }
  return out;
}

}  // namespace detail

// Loads a labeled dataset and builds its vocabularies from every record in
// the file. Records: {"glycan", "label", "split", optional "protein_id"}.
template <class T = float>
LoadedTaskDataset<T> load_task_dataset(const std::string& path,
                                       const std::string& protein_path = "") {
  bool any_protein = false;
  const auto rows = detail::read_task_rows(path, &any_protein);
  std::vector<GlycanTree> trees;
  trees.reserve(rows.size());
  for (const auto& row : rows) trees.push_back(row.tree);
  auto vocabs = build_vocabularies(trees);
  return detail::build_task_dataset<T>(path, rows, any_protein, protein_path,
                                       std::move(vocabs.first), std::move(vocabs.second),
                                       TemplateMode::strict);
}

// Loads a labeled dataset against fixed vocabularies (for warm starts from a
// checkpoint). Residue names outside the vocabulary fall back to the unknown
// type with a warning; linkages outside the vocabulary are hard errors.
template <class T = float>
LoadedTaskDataset<T> load_task_dataset(const std::string& path, const MonoVocab& mono,
                                       const LinkageVocab& linkage,
                                       const std::string& protein_path = "") {
  bool any_protein = false;
  const auto rows = detail::read_task_rows(path, &any_protein);
  return detail::build_task_dataset<T>(path, rows, any_protein, protein_path, mono, linkage,
                                       TemplateMode::lenient);
}

// Writes one JSON line per sample with its canonical form, label, split, and
// graph vector. Evaluation mode, so re-export is byte-identical.
template <class T = float>
void export_representations(const TaskDataset<T>& data, Parameters<T>& params,
                            const ModelConfig& model_config, const std::string& path,
                            std::size_t batch_size = 256) {
  model_config.validate();
  if (batch_size == 0) throw ConfigError("export batch size must be positive");
  std::vector<Json> lines;
  const std::array<std::pair<const TaskSplit<T>*, const char*>, 3> splits = {
      {{&data.train, "train"}, {&data.valid, "valid"}, {&data.test, "test"}}};
  for (const auto& [split, name] : splits) {
    for (std::size_t begin = 0; begin < split->size(); begin += batch_size) {
      const std::size_t end = std::min(begin + batch_size, split->size());
      std::vector<const HeteroGlycanGraph*> ptrs;
      for (std::size_t i = begin; i < end; ++i) ptrs.push_back(&split->graphs[i]);
      const auto batch = batch_graphs(std::span<const HeteroGlycanGraph* const>(ptrs));
      const auto encoded = encode(batch, params, model_config, /*training=*/false);
      const auto& values = encoded.graph_repr.values();
      const std::size_t width = encoded.graph_repr.cols();
      for (std::size_t i = begin; i < end; ++i) {
        std::vector<double> z(width);
        for (std::size_t c = 0; c < width; ++c) {
          z[c] = static_cast<double>(values[(i - begin) * width + c]);
        }
        lines.push_back(Json{{"glycan", split->canonical[i]},
                             {"label", split->labels[i]},
                             {"split", name},
                             {"z_g", z}});
      }
    }
  }
  write_jsonl(path, lines);
}

// ----------------------------------------------------------------------
// Synthetic data. The generators draw residues from a fixed pool of curated
// template names, attach children with donor-appropriate linkages, and render
// standard condensed notation (first branch inline, later branches
// bracketed). Taxonomy labels are the class of the root residue, so the
// label is a deterministic function of the structure. The pool leads with
// four names whose heavy-atom skeletons differ pairwise (hexose,
// deoxyhexose, N-acetyl hexosamine, uronic acid), so taxonomy roots stay
// separable by structure alone and not just by name id.

namespace detail {

inline const std::vector<std::string>& synth_residue_pool() {
  static const std::vector<std::string> pool = {"Gal", "Fuc", "GlcNAc", "GlcA",   "Glc",
                                                "Man", "Xyl", "Rha",    "GalNAc", "Neu5Ac"};
  return pool;
}

inline std::string synth_linkage(const std::string& child_name, Rng& rng) {
  if (child_name.rfind("Neu", 0) == 0 || child_name == "Kdn") {
    static const std::vector<std::string> sialic = {"a2-3", "a2-6"};
    return sialic[rng.below(sialic.size())];
  }
  static const std::vector<std::string> common = {"a1-2", "a1-3", "a1-4", "a1-6",
                                                  "b1-2", "b1-3", "b1-4", "b1-6"};
  return common[rng.below(common.size())];
}

struct SynthNode {
  std::string name;
  std::string linkage;  // to parent; empty at the root
  std::vector<std::size_t> children;
};

inline std::string render_synth(const std::vector<SynthNode>& nodes, std::size_t at) {
  std::string text;
  const auto& node = nodes[at];
  for (std::size_t k = 0; k < node.children.size(); ++k) {
    const auto child = node.children[k];
    std::string segment = render_synth(nodes, child) + "(" + nodes[child].linkage + ")";
    if (k == 0) {
      text += segment;
    } else {
      text += "[" + segment + "]";
    }
  }
  return text + node.name;
}

// Grows a random tree of `num_residues` nodes. The root name is forced when
// given (taxonomy labels); every other name is drawn from `name_pool`.
inline std::string synth_glycan(Rng& rng, std::size_t num_residues,
                                std::span<const std::string> name_pool,
                                const std::string* root_name = nullptr) {
  if (num_residues == 0) throw ConfigError("a synthetic glycan needs at least one residue");
  std::vector<SynthNode> nodes;
  nodes.push_back(SynthNode{root_name ? *root_name : name_pool[rng.below(name_pool.size())],
                            "", {}});
  while (nodes.size() < num_residues) {
    std::size_t parent = rng.below(nodes.size());
    while (nodes[parent].children.size() >= 3) parent = rng.below(nodes.size());
    SynthNode child;
    child.name = name_pool[rng.below(name_pool.size())];
    child.linkage = synth_linkage(child.name, rng);
    nodes[parent].children.push_back(nodes.size());
    nodes.push_back(std::move(child));
  }
  return render_synth(nodes, 0);
}

}  // namespace detail

// Unlabeled structures for pre-training, with residue counts uniform in
// [min_residues, max_residues].
inline std::vector<std::string> synth_corpus(std::size_t count, std::uint64_t seed,
                                             std::size_t min_residues = 2,
                                             std::size_t max_residues = 8) {
  if (min_residues == 0 || max_residues < min_residues) {
    throw ConfigError("synthetic corpus needs 1 <= min_residues <= max_residues");
  }
  Rng rng(seed);
  const auto& pool = detail::synth_residue_pool();
  std::vector<std::string> corpus;
  corpus.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t size = min_residues + rng.below(max_residues - min_residues + 1);
    corpus.push_back(detail::synth_glycan(rng, size, pool));
  }
  return corpus;
}

// Labeled classification records. Classes appear round-robin, the root
// residue of each structure is its class name, and interior residues come
// from the rest of the pool, so every label is recoverable from the graph.
inline std::vector<Json> synth_taxonomy_records(std::size_t count, int num_classes,
                                                std::uint64_t seed,
                                                std::array<double, 3> ratios = {0.8, 0.1, 0.1},
                                                std::size_t min_residues = 2,
                                                std::size_t max_residues = 6) {
  const auto& pool = detail::synth_residue_pool();
  if (num_classes < 2 || static_cast<std::size_t>(num_classes) + 2 > pool.size()) {
    throw ConfigError("taxonomy classes must be between 2 and " +
                      std::to_string(pool.size() - 2));
  }
  if (count < static_cast<std::size_t>(num_classes)) {
    throw ConfigError("need at least one record per class");
  }
  Rng rng(seed);
  const std::span<const std::string> interior(pool.data() + num_classes,
                                              pool.size() - static_cast<std::size_t>(num_classes));
  const auto assignment = split_dataset(count, ratios, seed);
  std::vector<std::string> split_of(count);
  for (const auto i : assignment.train) split_of[i] = "train";
  for (const auto i : assignment.valid) split_of[i] = "valid";
  for (const auto i : assignment.test) split_of[i] = "test";

  std::vector<Json> records;
  records.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(num_classes));
    const std::size_t size = min_residues + rng.below(max_residues - min_residues + 1);
    const std::string& root = pool[static_cast<std::size_t>(label)];
    records.push_back(Json{{"glycan", detail::synth_glycan(rng, size, interior, &root)},
                           {"label", label},
                           {"split", split_of[i]}});
  }
  return records;
}

struct SynthInteraction {
  std::vector<Json> records;   // {"glycan", "label", "protein_id", "split"}
  std::vector<Json> proteins;  // {"id", "vector"}
};

// Interaction pairs against a small synthetic protein panel. The label is a
// deterministic function of both sides: the mean of the protein vector plus
// a tenth of the residue count.
inline SynthInteraction synth_interaction_records(std::size_t count, std::size_t num_proteins,
                                                  std::size_t protein_dim, std::uint64_t seed,
                                                  std::array<double, 3> ratios = {0.8, 0.1,
                                                                                  0.1}) {
  if (num_proteins == 0 || protein_dim == 0) {
    throw ConfigError("interaction data needs at least one protein and a positive width");
  }
  Rng rng(seed);
  SynthInteraction out;
  std::vector<double> protein_means;
  for (std::size_t p = 0; p < num_proteins; ++p) {
    std::vector<double> vec(protein_dim);
    double sum = 0.0;
    for (auto& v : vec) {
      v = rng.uniform(-1.0, 1.0);
      sum += v;
    }
    protein_means.push_back(sum / static_cast<double>(protein_dim));
    out.proteins.push_back(Json{{"id", "P" + std::to_string(p)}, {"vector", vec}});
  }

  const auto& pool = detail::synth_residue_pool();
  const auto assignment = split_dataset(count, ratios, seed);
  std::vector<std::string> split_of(count);
  for (const auto i : assignment.train) split_of[i] = "train";
  for (const auto i : assignment.valid) split_of[i] = "valid";
  for (const auto i : assignment.test) split_of[i] = "test";

  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t size = 2 + rng.below(5);
    const std::size_t protein = rng.below(num_proteins);
    const double label = protein_means[protein] + 0.1 * static_cast<double>(size);
    out.records.push_back(Json{{"glycan", detail::synth_glycan(rng, size, pool)},
                               {"label", label},
                               {"protein_id", "P" + std::to_string(protein)},
                               {"split", split_of[i]}});
  }
  return out;
}

}  // namespace glyforge

#endif  // GLYFORGE_DATAKIT_HPP_
