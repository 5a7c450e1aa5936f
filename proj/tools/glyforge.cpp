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

// Command-line entry point. Every run-type subcommand reads one JSON config
// document; individual flags override config keys addressed by dotted path,
// so the effective configuration has a single source of truth. Exit codes:
// 0 success, 1 config or usage error, 2 data or parse error, 3 numerical
// failure (non-finite loss, failed gradient check).

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <initializer_list>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "glyforge/glyforge.hpp"

namespace glyforge {
namespace {

// ---------------------------------------------------------------------------
// Config plumbing: one JSON document, dotted-path lookups and overrides.

void set_dotted(Json& config, const std::string& path, Json value) {
  Json* node = &config;
  std::size_t begin = 0;
  while (true) {
    const std::size_t dot = path.find('.', begin);
    const std::string key =
        path.substr(begin, dot == std::string::npos ? std::string::npos : dot - begin);
    if (key.empty()) throw ConfigError("empty segment in config path: " + path);
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    Json& next = (*node)[key];
    if (next.is_null()) next = Json::object();
    if (!next.is_object()) {
      throw ConfigError("config path " + path + " descends into a non-object at " + key);
    }
    node = &next;
    begin = dot + 1;
  }
}

const Json* find_dotted(const Json& config, const std::string& path) {
  const Json* node = &config;
  std::size_t begin = 0;
  while (true) {
    const std::size_t dot = path.find('.', begin);
    const std::string key =
        path.substr(begin, dot == std::string::npos ? std::string::npos : dot - begin);
    if (!node->is_object()) return nullptr;
    const auto it = node->find(key);
    if (it == node->end()) return nullptr;
    if (dot == std::string::npos) return &*it;
    node = &*it;
    begin = dot + 1;
  }
}

template <class T>
T cfg_or(const Json& config, const std::string& path, T fallback) {
  const Json* value = find_dotted(config, path);
  if (value == nullptr) return fallback;
  try {
    return value->get<T>();
  } catch (const Json::exception& error) {
    throw ConfigError("config key " + path + ": " + error.what());
  }
}

// "a.b.c=value" with the value taken as JSON when it parses, else verbatim.
void apply_assignment(Json& config, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set expects path=value, got: " + assignment);
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value = Json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;
  set_dotted(config, path, std::move(value));
}

Json load_run_config(const std::string& config_path, const std::vector<std::string>& sets) {
  Json config = Json::object();
  if (!config_path.empty()) {
    if (!std::filesystem::exists(config_path)) {
      throw ConfigError("config file does not exist: " + config_path);
    }
    config = parse_json(read_file(config_path), config_path);
    if (!config.is_object()) {
      throw ConfigError(config_path + ": config root must be a JSON object");
    }
  }
  for (const auto& assignment : sets) apply_assignment(config, assignment);
  return config;
}

// ---------------------------------------------------------------------------
// Shared validation helpers.

std::string require_input_path(const Json& config, const std::string& key, const char* what) {
  const std::string path = cfg_or<std::string>(config, key, "");
  if (path.empty()) {
    throw ConfigError(std::string(what) + " is required (config key \"" + key + "\")");
  }
  if (!std::filesystem::exists(path)) {
    throw ConfigError(std::string(what) + " does not exist: " + path);
  }
  return path;
}

// Commands never mutate their inputs, so an output path that resolves to an
// input path is rejected before any work happens.
void forbid_clobbering_inputs(std::initializer_list<std::string> inputs,
                              std::initializer_list<std::string> outputs) {
  namespace fs = std::filesystem;
  for (const auto& out : outputs) {
    if (out.empty()) continue;
    for (const auto& in : inputs) {
      if (in.empty()) continue;
      std::error_code ec;
      const fs::path a = fs::weakly_canonical(out, ec);
      const fs::path b = ec ? fs::path(out) : a;
      std::error_code ec2;
      const fs::path c = fs::weakly_canonical(in, ec2);
      const fs::path d = ec2 ? fs::path(in) : c;
      if (b == d || out == in) {
        throw ConfigError("output path would overwrite input: " + out);
      }
    }
  }
}

void ensure_finite(double value, const char* what) {
  if (!std::isfinite(value)) {
    throw NumericError(std::string(what) + " is not finite");
  }
}

int threads_from_env() {
  const char* env = std::getenv("GLYFORGE_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long value = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || value < 1) {
    throw ConfigError(std::string("GLYFORGE_THREADS must be a positive integer, got: ") + env);
  }
  return static_cast<int>(value);
}

TemplateMode template_mode_from(const Json& config) {
  const std::string text = cfg_or<std::string>(config, "data.template_mode", "strict");
  if (text == "strict") return TemplateMode::strict;
  if (text == "lenient") return TemplateMode::lenient;
  throw ConfigError("data.template_mode must be \"strict\" or \"lenient\", got: " + text);
}

void emit_json(const Json& value, const std::string& out_path) {
  const std::string text = value.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_file(out_path, text);
  }
}

// Inserts ".seed<k>" before the extension so multi-seed runs keep their
// artifacts apart; single-seed runs use the path as given.
std::string seed_suffixed(const std::string& path, std::uint64_t seed, bool multi_seed) {
  if (path.empty() || !multi_seed) return path;
  const std::string tag = ".seed" + std::to_string(seed);
  const std::size_t dot = path.rfind('.');
  const std::size_t slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return path + tag;
  }
  return path.substr(0, dot) + tag + path.substr(dot);
}

std::vector<std::uint64_t> resolve_seeds(const Json& config) {
  const Json* value = find_dotted(config, "seed");
  if (value == nullptr) return {0};
  try {
    if (value->is_array()) {
      auto seeds = value->get<std::vector<std::uint64_t>>();
      if (seeds.empty()) throw ConfigError("seed list must not be empty");
      return seeds;
    }
    return {value->get<std::uint64_t>()};
  } catch (const Json::exception& error) {
    throw ConfigError(std::string("config key seed: ") + error.what());
  }
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  for (const double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (const double v : values) var += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(var / static_cast<double>(values.size()));
  return out;
}

// ---------------------------------------------------------------------------
// Corpus and checkpoint glue.

std::vector<std::string> read_corpus(const std::string& path) {
  std::vector<std::string> texts;
  for (const auto& row : read_jsonl(path)) {
    if (!row.contains("glycan") || !row.at("glycan").is_string()) {
      throw DataError(path + ": record is missing a \"glycan\" string");
    }
    texts.push_back(row.at("glycan").get<std::string>());
  }
  if (texts.empty()) throw DataError(path + ": no records");
  return texts;
}

struct Corpus {
  MonoVocab mono;
  LinkageVocab linkage;
  AtomVocab atom;
  std::vector<HeteroGlycanGraph> graphs;
};

Corpus assemble_corpus(const std::vector<std::string>& texts, TemplateMode mode) {
  std::vector<GlycanTree> trees;
  trees.reserve(texts.size());
  for (const auto& text : texts) trees.push_back(parse_glycan(text));
  auto [mono, linkage] = build_vocabularies(trees);
  Corpus corpus{std::move(mono), std::move(linkage), AtomVocab{}, {}};
  corpus.graphs.reserve(trees.size());
  for (const auto& tree : trees) {
    corpus.graphs.push_back(assemble_graph(tree, corpus.mono, corpus.linkage, corpus.atom, mode));
  }
  return corpus;
}

LinkageType linkage_from_string(const std::string& text) {
  if (text.size() != 4 || text[2] != '-') {
    throw DataError("malformed linkage string: " + text);
  }
  return LinkageType{text[0], text[1], text[3]};
}

MonoVocab mono_vocab_from(const std::vector<std::string>& names) {
  if (names.empty()) throw DataError("checkpoint monosaccharide vocabulary is empty");
  return MonoVocab{names};
}

LinkageVocab linkage_vocab_from(const std::vector<std::string>& strings) {
  LinkageVocab vocab;
  for (const auto& text : strings) vocab.linkages.push_back(linkage_from_string(text));
  return vocab;
}

// Fills the type counts a model needs from the vocabularies it will see.
ModelConfig model_from_config(const Json& config, std::size_t num_atom_types,
                              std::size_t num_mono_types, std::size_t num_mm_relations) {
  ModelConfig model;
  model.hidden_dim = cfg_or(config, "model.hidden_dim", model.hidden_dim);
  model.num_blocks = cfg_or(config, "model.num_blocks", model.num_blocks);
  model.variant = encoder_variant_from_string(
      cfg_or<std::string>(config, "model.variant", to_string(model.variant)));
  model.readout = readout_scope_from_string(
      cfg_or<std::string>(config, "model.readout", to_string(model.readout)));
  model.collapse_am_relations =
      cfg_or(config, "model.collapse_am_relations", model.collapse_am_relations);
  model.num_atom_types = static_cast<int>(num_atom_types);
  model.num_mono_types = static_cast<int>(num_mono_types);
  model.num_mm_relations = static_cast<int>(num_mm_relations);
  model.validate();
  return model;
}

PretrainConfig pretrain_from_config(const Json& config, std::uint64_t seed) {
  PretrainConfig pretrain;
  pretrain.rho_a = cfg_or(config, "pretrain.rho_a", pretrain.rho_a);
  pretrain.rho_m = cfg_or(config, "pretrain.rho_m", pretrain.rho_m);
  pretrain.lr = cfg_or(config, "pretrain.lr", pretrain.lr);
  pretrain.weight_decay = cfg_or(config, "pretrain.weight_decay", pretrain.weight_decay);
  pretrain.batch_size = cfg_or(config, "pretrain.batch_size", pretrain.batch_size);
  pretrain.epochs = cfg_or(config, "pretrain.epochs", pretrain.epochs);
  pretrain.record_wall_time =
      cfg_or(config, "pretrain.record_wall_time", pretrain.record_wall_time);
  pretrain.seed = seed;
  pretrain.validate();
  return pretrain;
}

FinetuneConfig finetune_from_config(const Json& config, std::uint64_t seed, bool has_warm_start) {
  FinetuneConfig finetune;
  finetune.mode = finetune_mode_from_string(cfg_or<std::string>(
      config, "finetune.mode", has_warm_start ? "pretrained" : "scratch"));
  finetune.head_lr = cfg_or(config, "finetune.head_lr", finetune.head_lr);
  finetune.pretrained_encoder_lr =
      cfg_or(config, "finetune.pretrained_encoder_lr", finetune.pretrained_encoder_lr);
  finetune.weight_decay = cfg_or(config, "finetune.weight_decay", finetune.weight_decay);
  finetune.seed = seed;
  finetune.validate();
  return finetune;
}

// The task comes from the config when given; otherwise it is inferred from
// the dataset: protein partners mean interaction regression, and labeled
// classes mean multiclass over the label range.
TaskSpec task_from_config_or_data(const Json& config, const LoadedTaskDataset<float>& loaded) {
  if (const Json* spec = find_dotted(config, "task")) {
    return task_spec_from_json(*spec);
  }
  if (loaded.interaction) return TaskSpec::interaction_spec();
  double max_label = 0.0;
  for (const TaskSplit<float>* split :
       {&loaded.data.train, &loaded.data.valid, &loaded.data.test}) {
    for (const double label : split->labels) max_label = std::max(max_label, label);
  }
  const int num_classes = static_cast<int>(std::llround(max_label)) + 1;
  return TaskSpec::multiclass_spec(num_classes);
}

const TaskSplit<float>& split_by_name(const TaskDataset<float>& data, const std::string& name) {
  if (name == "train") return data.train;
  if (name == "valid") return data.valid;
  if (name == "test") return data.test;
  throw ConfigError("split must be train, valid or test, got: " + name);
}

// ---------------------------------------------------------------------------
// Subcommand payloads.

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::uint64_t> seeds;
  int threads = 1;
  bool threads_set = false;
  bool seeds_set = false;

  Json load() const {
    Json config = load_run_config(config_path, sets);
    if (seeds_set) {
      if (seeds.size() == 1) {
        set_dotted(config, "seed", seeds.front());
      } else {
        set_dotted(config, "seed", seeds);
      }
    }
    // Precedence: explicit flag, then config key, then the environment
    // default captured at startup.
    if (threads_set || find_dotted(config, "threads") == nullptr) {
      set_dotted(config, "threads", threads);
    }
    if (cfg_or(config, "threads", 1) < 1) {
      throw ConfigError("threads must be at least 1");
    }
    return config;
  }
};

// Attaches the options shared by every run-type subcommand and records
// whether each flag was actually passed, so flags override config keys only
// when present.
void add_common_options(CLI::App* sub, CommonArgs& args, int default_threads) {
  sub->add_option("--config", args.config_path, "JSON config file");
  sub->add_option("--set", args.sets,
                  "override a config key by dotted path, e.g. --set model.hidden_dim=64");
  args.threads = default_threads;
  sub->add_option("--seed", args.seeds, "random seed (repeatable for multi-seed protocols)")
      ->each([&args](const std::string&) { args.seeds_set = true; });
  sub->add_option("--threads", args.threads,
                  "worker thread count (default from GLYFORGE_THREADS, else 1)")
      ->each([&args](const std::string&) { args.threads_set = true; });
}

int cmd_parse(const std::string& text, bool from_file, bool stats_only, bool lenient) {
  const TemplateMode mode = lenient ? TemplateMode::lenient : TemplateMode::strict;
  const auto report_one = [&](const std::string& glycan) {
    const GlycanTree tree = parse_glycan(glycan);
    const std::vector<GlycanTree> trees{tree};
    const auto [mono, linkage] = build_vocabularies(trees);
    const HeteroGlycanGraph graph = assemble_graph(tree, mono, linkage, AtomVocab{}, mode);
    Json row;
    if (!stats_only) row["canonical"] = canonicalize(tree);
    row["N"] = graph.num_atoms();
    row["M"] = graph.num_monos();
    row["e_aa"] = graph.e_aa.size();
    row["e_am"] = graph.e_am.size();
    row["e_mm"] = graph.e_mm.size();
    std::cout << row.dump() << "\n";
  };
  if (from_file) {
    if (!std::filesystem::exists(text)) {
      throw ConfigError("input file does not exist: " + text);
    }
    for (const auto& glycan : read_corpus(text)) report_one(glycan);
  } else {
    report_one(text);
  }
  return 0;
}

int cmd_curate(const CommonArgs& common, const std::string& input_flag,
               const std::vector<std::string>& downstream_flags, const std::string& out_flag,
               const std::string& report_flag) {
  Json config = common.load();
  if (!input_flag.empty()) set_dotted(config, "data.input", input_flag);
  if (!downstream_flags.empty()) set_dotted(config, "data.downstream", downstream_flags);
  if (!out_flag.empty()) set_dotted(config, "io.out", out_flag);
  if (!report_flag.empty()) set_dotted(config, "io.report", report_flag);

  const std::string input = require_input_path(config, "data.input", "curation input");
  const auto downstream =
      cfg_or<std::vector<std::string>>(config, "data.downstream", {});
  const std::string out = cfg_or<std::string>(config, "io.out", "");
  const std::string report_path = cfg_or<std::string>(config, "io.report", "");
  for (const auto& path : downstream) {
    if (!std::filesystem::exists(path)) {
      throw ConfigError("downstream file does not exist: " + path);
    }
  }
  std::initializer_list<std::string> outputs = {out, report_path};
  for (const auto& path : downstream) forbid_clobbering_inputs({path}, outputs);
  forbid_clobbering_inputs({input}, outputs);

  const std::vector<GlycanRecord> records = read_glycan_records(input);
  std::vector<std::unordered_set<std::string>> heldout;
  for (const auto& path : downstream) heldout.push_back(canonical_set_from_jsonl(path));
  const CurationResult result = curate(records, heldout);

  if (!out.empty()) {
    std::vector<Json> lines;
    lines.reserve(result.kept.size());
    for (const auto& record : result.kept) lines.push_back(Json{{"glycan", record.canonical}});
    write_jsonl(out, lines);
  }
  emit_json(result.report.to_json(), report_path);
  if (!report_path.empty()) emit_json(result.report.to_json(), "");
  return 0;
}

int cmd_synth(const std::string& kind, std::size_t count, std::uint64_t seed,
              const std::string& out, const std::string& proteins_out, int num_classes,
              std::size_t min_residues, std::size_t max_residues, std::size_t num_proteins,
              std::size_t protein_dim, const std::vector<double>& fractions) {
  if (out.empty()) throw ConfigError("--out is required");
  std::array<double, 3> ratios = {0.8, 0.1, 0.1};
  if (!fractions.empty()) {
    if (fractions.size() != 3) throw ConfigError("--split-fractions needs three values");
    ratios = {fractions[0], fractions[1], fractions[2]};
  }
  Json summary{{"command", "synth"}, {"kind", kind}, {"count", count},
               {"seed", seed},       {"out", out}};
  if (kind == "corpus") {
    std::vector<Json> lines;
    for (const auto& text : synth_corpus(count, seed, min_residues, max_residues)) {
      lines.push_back(Json{{"glycan", text}});
    }
    write_jsonl(out, lines);
  } else if (kind == "taxonomy") {
    write_jsonl(out, synth_taxonomy_records(count, num_classes, seed, ratios, min_residues,
                                            max_residues));
    summary["num_classes"] = num_classes;
  } else if (kind == "interaction") {
    if (proteins_out.empty()) {
      throw ConfigError("--proteins-out is required for interaction data");
    }
    const SynthInteraction synth =
        synth_interaction_records(count, num_proteins, protein_dim, seed, ratios);
    write_jsonl(out, synth.records);
    write_jsonl(proteins_out, synth.proteins);
    summary["proteins_out"] = proteins_out;
    summary["num_proteins"] = num_proteins;
    summary["protein_dim"] = protein_dim;
  } else {
    throw ConfigError("--kind must be corpus, taxonomy or interaction, got: " + kind);
  }
  emit_json(summary, "");
  return 0;
}

int cmd_pretrain(const CommonArgs& common, const std::string& input_flag,
                 const std::string& checkpoint_flag, const std::string& metrics_flag,
                 const std::string& summary_flag) {
  Json config = common.load();
  if (!input_flag.empty()) set_dotted(config, "data.input", input_flag);
  if (!checkpoint_flag.empty()) set_dotted(config, "io.checkpoint", checkpoint_flag);
  if (!metrics_flag.empty()) set_dotted(config, "io.metrics", metrics_flag);
  if (!summary_flag.empty()) set_dotted(config, "io.summary", summary_flag);

  const std::string input = require_input_path(config, "data.input", "training corpus");
  const std::string checkpoint_path = cfg_or<std::string>(config, "io.checkpoint", "");
  const std::string metrics_path = cfg_or<std::string>(config, "io.metrics", "");
  const std::string summary_path = cfg_or<std::string>(config, "io.summary", "");
  forbid_clobbering_inputs({input}, {checkpoint_path, metrics_path, summary_path});
  const std::vector<std::uint64_t> seeds = resolve_seeds(config);
  const bool multi = seeds.size() > 1;

  const Corpus corpus = assemble_corpus(read_corpus(input), template_mode_from(config));
  const ModelConfig model = model_from_config(config, corpus.atom.size(), corpus.mono.size(),
                                              corpus.linkage.num_relations());
  const CheckpointVocabs vocabs{corpus.atom.elements, corpus.mono.names,
                                corpus.linkage.strings()};

  Json runs = Json::array();
  std::vector<double> final_losses;
  for (const std::uint64_t seed : seeds) {
    const PretrainConfig pretrain = pretrain_from_config(config, seed);
    const std::string metrics_file = seed_suffixed(metrics_path, seed, multi);
    const auto result = run_pretraining<float>(corpus.graphs, model, pretrain,
                                               static_cast<std::int32_t>(corpus.atom.unknown_id()),
                                               static_cast<std::int32_t>(corpus.mono.unknown_id()),
                                               metrics_file);
    const double final_loss = result.curves.back().loss;
    ensure_finite(result.first_batch_loss, "first batch loss");
    ensure_finite(final_loss, "final training loss");
    const std::string checkpoint_file = seed_suffixed(checkpoint_path, seed, multi);
    if (!checkpoint_file.empty()) {
      save_checkpoint(checkpoint_file, model, vocabs, result.params);
    }
    Json run{{"seed", seed},
             {"final_loss", final_loss},
             {"first_batch_loss", result.first_batch_loss},
             {"first_batch_atom_loss", result.first_batch_atom_loss},
             {"epochs", result.curves.size()}};
    if (!checkpoint_file.empty()) run["checkpoint"] = checkpoint_file;
    if (!metrics_file.empty()) run["metrics"] = metrics_file;
    runs.push_back(std::move(run));
    final_losses.push_back(final_loss);
  }

  const MeanStd loss_stats = mean_std(final_losses);
  Json summary{{"command", "pretrain"},
               {"graphs", corpus.graphs.size()},
               {"model", model_config_to_json(model)},
               {"threads", cfg_or(config, "threads", 1)},
               {"runs", runs},
               {"final_loss", Json{{"mean", loss_stats.mean}, {"std", loss_stats.std}}}};
  emit_json(summary, summary_path);
  if (!summary_path.empty()) emit_json(summary, "");
  return 0;
}

int cmd_train(const CommonArgs& common, const std::string& input_flag,
              const std::string& proteins_flag, const std::string& warm_start_flag,
              const std::string& checkpoint_flag, const std::string& metrics_flag,
              const std::string& summary_flag) {
  Json config = common.load();
  if (!input_flag.empty()) set_dotted(config, "data.input", input_flag);
  if (!proteins_flag.empty()) set_dotted(config, "data.proteins", proteins_flag);
  if (!warm_start_flag.empty()) set_dotted(config, "io.warm_start", warm_start_flag);
  if (!checkpoint_flag.empty()) set_dotted(config, "io.checkpoint", checkpoint_flag);
  if (!metrics_flag.empty()) set_dotted(config, "io.metrics", metrics_flag);
  if (!summary_flag.empty()) set_dotted(config, "io.summary", summary_flag);

  const std::string input = require_input_path(config, "data.input", "task dataset");
  const std::string proteins = cfg_or<std::string>(config, "data.proteins", "");
  if (!proteins.empty()) require_input_path(config, "data.proteins", "protein sidecar");
  const std::string warm_start_path = cfg_or<std::string>(config, "io.warm_start", "");
  const std::string checkpoint_path = cfg_or<std::string>(config, "io.checkpoint", "");
  const std::string metrics_path = cfg_or<std::string>(config, "io.metrics", "");
  const std::string summary_path = cfg_or<std::string>(config, "io.summary", "");
  forbid_clobbering_inputs({input, proteins, warm_start_path},
                           {checkpoint_path, metrics_path, summary_path});

  // Mode and warm start must agree before any data is touched.
  const std::string mode_text = cfg_or<std::string>(
      config, "finetune.mode", warm_start_path.empty() ? "scratch" : "pretrained");
  const FinetuneMode mode = finetune_mode_from_string(mode_text);
  if ((mode == FinetuneMode::pretrained) != !warm_start_path.empty()) {
    throw ConfigError("finetune.mode \"" + mode_text + "\" does not match " +
                      (warm_start_path.empty() ? "a missing" : "a given") +
                      " warm-start checkpoint");
  }
  if (!warm_start_path.empty() && !std::filesystem::exists(warm_start_path)) {
    throw ConfigError("warm-start checkpoint does not exist: " + warm_start_path);
  }

  // Warm starts inherit the checkpoint's architecture and vocabularies so
  // the copied weights line up; scratch runs derive both from the dataset.
  std::optional<LoadedCheckpoint<float>> warm;
  LoadedTaskDataset<float> loaded;
  ModelConfig model;
  if (!warm_start_path.empty()) {
    warm = load_checkpoint<float>(warm_start_path);
    loaded = load_task_dataset<float>(input, mono_vocab_from(warm->vocabs.monos),
                                      linkage_vocab_from(warm->vocabs.linkages), proteins);
    model = warm->config;
  } else {
    loaded = load_task_dataset<float>(input, proteins);
    model = model_from_config(config, loaded.atom.size(), loaded.mono.size(),
                              loaded.linkage.num_relations());
  }
  const TaskSpec spec = task_from_config_or_data(config, loaded);
  const CheckpointVocabs vocabs{loaded.atom.elements, loaded.mono.names,
                                loaded.linkage.strings()};

  const std::vector<std::uint64_t> seeds = resolve_seeds(config);
  const bool multi = seeds.size() > 1;
  Json runs = Json::array();
  std::vector<double> valid_metrics;
  std::vector<double> test_metrics;
  for (const std::uint64_t seed : seeds) {
    const FinetuneConfig finetune_config = finetune_from_config(config, seed, warm.has_value());
    const std::string metrics_file = seed_suffixed(metrics_path, seed, multi);
    auto result = finetune(loaded.data, model, spec, finetune_config,
                           warm ? &warm->params : nullptr, metrics_file);
    ensure_finite(result.curves.back().train_loss, "final training loss");
    ensure_finite(result.best_valid_metric, "validation metric");

    Json run{{"seed", seed},
             {"best_epoch", result.best_epoch},
             {"valid_metric", result.best_valid_metric}};
    valid_metrics.push_back(result.best_valid_metric);
    if (!loaded.data.test.empty()) {
      const auto test_report = evaluate(loaded.data.test, result.params, model, spec,
                                        loaded.data.protein_dim);
      ensure_finite(test_report.metric, "test metric");
      run["test_metric"] = test_report.metric;
      test_metrics.push_back(test_report.metric);
    }
    const std::string checkpoint_file = seed_suffixed(checkpoint_path, seed, multi);
    if (!checkpoint_file.empty()) {
      save_checkpoint(checkpoint_file, model, vocabs, result.params);
      run["checkpoint"] = checkpoint_file;
    }
    if (!metrics_file.empty()) run["metrics"] = metrics_file;
    runs.push_back(std::move(run));
  }

  const MeanStd valid_stats = mean_std(valid_metrics);
  Json summary{{"command", "train"},
               {"task", task_spec_to_json(spec)},
               {"mode", to_string(mode)},
               {"model", model_config_to_json(model)},
               {"threads", cfg_or(config, "threads", 1)},
               {"unknown_mono_residues", loaded.unknown_mono_residues},
               {"runs", runs},
               {"valid_metric", Json{{"mean", valid_stats.mean}, {"std", valid_stats.std}}}};
  if (!test_metrics.empty()) {
    const MeanStd test_stats = mean_std(test_metrics);
    summary["test_metric"] = Json{{"mean", test_stats.mean}, {"std", test_stats.std}};
  }
  emit_json(summary, summary_path);
  if (!summary_path.empty()) emit_json(summary, "");
  return 0;
}

int cmd_eval(const CommonArgs& common, const std::string& checkpoint_flag,
             const std::string& input_flag, const std::string& proteins_flag,
             const std::string& split_flag, const std::string& predictions_flag,
             const std::string& out_flag) {
  Json config = common.load();
  if (!checkpoint_flag.empty()) set_dotted(config, "io.checkpoint", checkpoint_flag);
  if (!input_flag.empty()) set_dotted(config, "data.input", input_flag);
  if (!proteins_flag.empty()) set_dotted(config, "data.proteins", proteins_flag);
  if (!split_flag.empty()) set_dotted(config, "data.split", split_flag);
  if (!predictions_flag.empty()) set_dotted(config, "io.predictions", predictions_flag);
  if (!out_flag.empty()) set_dotted(config, "io.out", out_flag);

  // All paths are validated up front: a bad checkpoint or dataset path must
  // fail before any output file is created.
  const std::string checkpoint_path =
      require_input_path(config, "io.checkpoint", "model checkpoint");
  const std::string input = require_input_path(config, "data.input", "task dataset");
  const std::string proteins = cfg_or<std::string>(config, "data.proteins", "");
  if (!proteins.empty()) require_input_path(config, "data.proteins", "protein sidecar");
  const std::string split_name = cfg_or<std::string>(config, "data.split", "test");
  const std::string predictions_path = cfg_or<std::string>(config, "io.predictions", "");
  const std::string out_path = cfg_or<std::string>(config, "io.out", "");
  forbid_clobbering_inputs({checkpoint_path, input, proteins}, {predictions_path, out_path});

  auto checkpoint = load_checkpoint<float>(checkpoint_path);
  if (!checkpoint.params.contains("task.W1")) {
    throw ConfigError("checkpoint has no task head; train one before evaluating");
  }
  const LoadedTaskDataset<float> loaded =
      load_task_dataset<float>(input, mono_vocab_from(checkpoint.vocabs.monos),
                               linkage_vocab_from(checkpoint.vocabs.linkages), proteins);
  const TaskSpec spec = task_from_config_or_data(config, loaded);
  const TaskSplit<float>& split = split_by_name(loaded.data, split_name);

  const auto report = evaluate(split, checkpoint.params, checkpoint.config, spec,
                               loaded.data.protein_dim, predictions_path);
  ensure_finite(report.metric, "evaluation metric");

  Json summary{{"command", "eval"},
               {"split", split_name},
               {"samples", split.size()},
               {"metric", report.metric},
               {"metric_name", to_string(spec.metric)},
               {"task", task_spec_to_json(spec)},
               {"seed", resolve_seeds(config).front()},
               {"threads", cfg_or(config, "threads", 1)},
               {"unknown_mono_residues", loaded.unknown_mono_residues},
               {"checkpoint", checkpoint_path}};
  if (!predictions_path.empty()) summary["predictions"] = predictions_path;
  emit_json(summary, out_path);
  if (!out_path.empty()) emit_json(summary, "");
  return 0;
}

int cmd_export(const CommonArgs& common, const std::string& checkpoint_flag,
               const std::string& input_flag, const std::string& proteins_flag,
               const std::string& out_flag, int batch_size_flag) {
  Json config = common.load();
  if (!checkpoint_flag.empty()) set_dotted(config, "io.checkpoint", checkpoint_flag);
  if (!input_flag.empty()) set_dotted(config, "data.input", input_flag);
  if (!proteins_flag.empty()) set_dotted(config, "data.proteins", proteins_flag);
  if (!out_flag.empty()) set_dotted(config, "io.out", out_flag);
  if (batch_size_flag > 0) set_dotted(config, "export.batch_size", batch_size_flag);

  const std::string checkpoint_path =
      require_input_path(config, "io.checkpoint", "model checkpoint");
  const std::string input = require_input_path(config, "data.input", "task dataset");
  const std::string proteins = cfg_or<std::string>(config, "data.proteins", "");
  if (!proteins.empty()) require_input_path(config, "data.proteins", "protein sidecar");
  const std::string out = cfg_or<std::string>(config, "io.out", "");
  if (out.empty()) throw ConfigError("an output path is required (config key \"io.out\")");
  const int batch_size = cfg_or(config, "export.batch_size", 256);
  if (batch_size < 1) throw ConfigError("export.batch_size must be at least 1");
  forbid_clobbering_inputs({checkpoint_path, input, proteins}, {out});

  auto checkpoint = load_checkpoint<float>(checkpoint_path);
  LoadedTaskDataset<float> loaded =
      load_task_dataset<float>(input, mono_vocab_from(checkpoint.vocabs.monos),
                               linkage_vocab_from(checkpoint.vocabs.linkages), proteins);
  export_representations(loaded.data, checkpoint.params, checkpoint.config, out,
                         static_cast<std::size_t>(batch_size));

  const std::size_t rows =
      loaded.data.train.size() + loaded.data.valid.size() + loaded.data.test.size();
  emit_json(Json{{"command", "export-embeddings"},
                 {"rows", rows},
                 {"width", 2 * checkpoint.config.hidden_dim},
                 {"unknown_mono_residues", loaded.unknown_mono_residues},
                 {"out", out}},
            "");
  return 0;
}

int cmd_bench(const CommonArgs& common, const std::string& input_flag,
              std::size_t synth_count, int batch_flag, int warmup_flag, int repeats_flag,
              const std::string& variant_flag, const std::string& out_flag, bool json_stdout) {
  Json config = common.load();
  if (!input_flag.empty()) set_dotted(config, "data.input", input_flag);
  if (batch_flag > 0) set_dotted(config, "bench.batch_size", batch_flag);
  if (warmup_flag >= 0) set_dotted(config, "bench.warmup_batches", warmup_flag);
  if (repeats_flag > 0) set_dotted(config, "bench.repeats", repeats_flag);
  if (!variant_flag.empty()) set_dotted(config, "model.variant", variant_flag);
  if (!out_flag.empty()) set_dotted(config, "io.out", out_flag);

  const std::string input = cfg_or<std::string>(config, "data.input", "");
  const std::string out = cfg_or<std::string>(config, "io.out", "");
  const std::uint64_t seed = resolve_seeds(config).front();
  std::vector<std::string> texts;
  if (input.empty()) {
    texts = synth_corpus(synth_count, seed);
  } else {
    require_input_path(config, "data.input", "benchmark corpus");
    texts = read_corpus(input);
  }
  forbid_clobbering_inputs({input}, {out});

  const Corpus corpus = assemble_corpus(texts, template_mode_from(config));
  const ModelConfig model = model_from_config(config, corpus.atom.size(), corpus.mono.size(),
                                              corpus.linkage.num_relations());
  const int threads = cfg_or(config, "threads", 1);
  const BenchReport report = run_bench<float>(
      model, corpus.graphs, static_cast<std::int32_t>(corpus.atom.unknown_id()),
      static_cast<std::int32_t>(corpus.mono.unknown_id()),
      cfg_or(config, "bench.batch_size", 256), cfg_or(config, "bench.warmup_batches", 2),
      cfg_or(config, "bench.repeats", 3), seed, threads);

  if (json_stdout) {
    emit_json(report.to_json(), "");
  } else {
    std::cout << report.table();
  }
  if (!out.empty()) emit_json(report.to_json(), out);
  return 0;
}

int cmd_gradcheck(const CommonArgs& common, const std::string& glycan, int hidden_dim,
                  double tolerance, double step, const std::string& out_flag) {
  Json config = common.load();
  if (hidden_dim < 1) throw ConfigError("--hidden must be at least 1");
  if (tolerance <= 0.0 || step <= 0.0) {
    throw ConfigError("tolerance and step must be positive");
  }
  const std::uint64_t seed = resolve_seeds(config).front();

  // A tiny double-precision model: one block over one small glycan, with a
  // classification head on the graph vector, checked against central
  // finite differences.
  const GlycanTree tree = parse_glycan(glycan);
  const std::vector<GlycanTree> trees{tree};
  const auto [mono, linkage] = build_vocabularies(trees);
  const AtomVocab atom;
  const HeteroGlycanGraph graph = assemble_graph(tree, mono, linkage, atom,
                                                 TemplateMode::lenient);

  ModelConfig model;
  model.hidden_dim = hidden_dim;
  model.num_blocks = 1;
  model.num_atom_types = static_cast<int>(atom.size());
  model.num_mono_types = static_cast<int>(mono.size());
  model.num_mm_relations = static_cast<int>(linkage.num_relations());
  model.validate();

  Rng rng(seed);
  auto params = init_encoder_params<double>(model, rng);
  const std::size_t d = static_cast<std::size_t>(hidden_dim);
  add_mlp_head_params(params, "head", 2 * d, d, 3, rng);

  const LossFn<double> loss_fn = [&]() {
    const auto encoded = encode(graph, params, model, /*training=*/true);
    const auto logits = mlp_head_forward(encoded.graph_repr, params, "head");
    return softmax_cross_entropy(logits, std::vector<std::int32_t>{0});
  };
  const GradCheckReport report = finite_diff_check<double>(loss_fn, params, tolerance, step);

  const GradCheckEntry* worst = nullptr;
  std::size_t checked_values = 0;
  for (const auto& entry : report.per_parameter) {
    if (worst == nullptr || entry.max_rel_err > worst->max_rel_err) worst = &entry;
    ++checked_values;
  }
  Json summary{{"command", "gradcheck"},
               {"glycan", glycan},
               {"hidden_dim", hidden_dim},
               {"seed", seed},
               {"parameters", checked_values},
               {"max_rel_err", report.max_rel_err},
               {"tolerance", report.tolerance},
               {"passed", report.passed()}};
  if (worst != nullptr) {
    summary["worst"] = Json{{"name", worst->name},
                            {"rel_err", worst->max_rel_err},
                            {"analytic", worst->analytic_at_worst},
                            {"finite_diff", worst->fd_at_worst}};
  }
  emit_json(summary, out_flag);
  if (!out_flag.empty()) emit_json(summary, "");
  if (!report.passed()) {
    std::cerr << Json{{"error",
                       {{"type", "numeric"},
                        {"message", "gradient check failed: max relative error " +
                                        std::to_string(report.max_rel_err) + " exceeds " +
                                        std::to_string(report.tolerance)}}}}
                     .dump()
              << "\n";
    return 3;
  }
  return 0;
}

int fail(int code, const char* type, const std::string& message) {
  std::cerr << Json{{"error", {{"type", type}, {"message", message}}}}.dump() << "\n";
  return code;
}

int dispatch(int argc, char** argv) {
  int default_threads = 1;
  try {
    default_threads = threads_from_env();
  } catch (const ConfigError& error) {
    return fail(1, "config", error.what());
  }

  CLI::App app{"glyforge: all-atom glycan graphs, encoders and task harnesses"};
  app.require_subcommand(1);

  // parse
  std::string parse_text;
  bool parse_from_file = false;
  bool parse_stats_only = false;
  bool parse_strict = false;
  CLI::App* parse_cmd =
      app.add_subcommand("parse", "parse glycan notation and print canonical form and stats");
  parse_cmd->add_option("input", parse_text, "glycan string (or a JSONL path with --file)")
      ->required();
  parse_cmd->add_flag("--file", parse_from_file, "treat the input as a JSONL corpus path");
  parse_cmd->add_flag("--stats-only", parse_stats_only, "omit the canonical form");
  parse_cmd->add_flag("--strict-templates", parse_strict,
                      "reject residues without a curated atom template");

  // curate
  CommonArgs curate_common;
  std::string curate_input, curate_out, curate_report;
  std::vector<std::string> curate_downstream;
  CLI::App* curate_cmd =
      app.add_subcommand("curate", "filter raw structures and report rejection counts");
  add_common_options(curate_cmd, curate_common, default_threads);
  curate_cmd->add_option("--input", curate_input, "raw records JSONL");
  curate_cmd->add_option("--downstream", curate_downstream,
                         "held-out JSONL whose structures must not leak (repeatable)");
  curate_cmd->add_option("--out", curate_out, "kept records JSONL");
  curate_cmd->add_option("--report", curate_report, "curation report JSON path");

  // synth
  std::string synth_kind = "corpus", synth_out, synth_proteins_out;
  std::size_t synth_count = 100, synth_min = 2, synth_max = 8;
  std::size_t synth_num_proteins = 8, synth_protein_dim = 16;
  std::uint64_t synth_seed = 0;
  int synth_classes = 4;
  std::vector<double> synth_fractions;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate synthetic corpora and datasets");
  synth_cmd->add_option("--kind", synth_kind, "corpus, taxonomy or interaction");
  synth_cmd->add_option("--count", synth_count, "number of records");
  synth_cmd->add_option("--seed", synth_seed, "random seed");
  synth_cmd->add_option("--out", synth_out, "output JSONL path")->required();
  synth_cmd->add_option("--classes", synth_classes, "taxonomy class count");
  synth_cmd->add_option("--min-residues", synth_min, "smallest structure size");
  synth_cmd->add_option("--max-residues", synth_max, "largest structure size");
  synth_cmd->add_option("--num-proteins", synth_num_proteins, "interaction panel size");
  synth_cmd->add_option("--protein-dim", synth_protein_dim, "protein vector width");
  synth_cmd->add_option("--proteins-out", synth_proteins_out, "protein sidecar JSONL path");
  synth_cmd->add_option("--split-fractions", synth_fractions,
                        "train valid test fractions (three values)");

  // pretrain
  CommonArgs pretrain_common;
  std::string pretrain_input, pretrain_ckpt, pretrain_metrics, pretrain_summary;
  CLI::App* pretrain_cmd =
      app.add_subcommand("pretrain", "mask-and-recover pretraining over a corpus");
  add_common_options(pretrain_cmd, pretrain_common, default_threads);
  pretrain_cmd->add_option("--input", pretrain_input, "corpus JSONL");
  pretrain_cmd->add_option("--checkpoint", pretrain_ckpt, "checkpoint output path");
  pretrain_cmd->add_option("--metrics", pretrain_metrics, "per-epoch metrics JSONL path");
  pretrain_cmd->add_option("--summary", pretrain_summary, "run summary JSON path");

  // train
  CommonArgs train_common;
  std::string train_input, train_proteins, train_warm, train_ckpt, train_metrics, train_summary;
  CLI::App* train_cmd =
      app.add_subcommand("train", "fine-tune a task head, from scratch or a checkpoint");
  add_common_options(train_cmd, train_common, default_threads);
  train_cmd->add_option("--input", train_input, "labeled dataset JSONL");
  train_cmd->add_option("--proteins", train_proteins, "protein sidecar JSONL");
  train_cmd->add_option("--warm-start", train_warm, "pretrained checkpoint to start from");
  train_cmd->add_option("--checkpoint", train_ckpt, "fine-tuned checkpoint output path");
  train_cmd->add_option("--metrics", train_metrics, "per-epoch curves JSONL path");
  train_cmd->add_option("--summary", train_summary, "run summary JSON path");

  // eval
  CommonArgs eval_common;
  std::string eval_ckpt, eval_input, eval_proteins, eval_split, eval_predictions, eval_out;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on one dataset split");
  add_common_options(eval_cmd, eval_common, default_threads);
  eval_cmd->add_option("--checkpoint", eval_ckpt, "model checkpoint");
  eval_cmd->add_option("--input", eval_input, "labeled dataset JSONL");
  eval_cmd->add_option("--proteins", eval_proteins, "protein sidecar JSONL");
  eval_cmd->add_option("--split", eval_split, "train, valid or test (default test)");
  eval_cmd->add_option("--predictions", eval_predictions, "per-sample predictions JSONL path");
  eval_cmd->add_option("--out", eval_out, "metric summary JSON path");

  // export-embeddings
  CommonArgs export_common;
  std::string export_ckpt, export_input, export_proteins, export_out;
  int export_batch = 0;
  CLI::App* export_cmd =
      app.add_subcommand("export-embeddings", "write graph vectors for every sample");
  add_common_options(export_cmd, export_common, default_threads);
  export_cmd->add_option("--checkpoint", export_ckpt, "model checkpoint");
  export_cmd->add_option("--input", export_input, "labeled dataset JSONL");
  export_cmd->add_option("--proteins", export_proteins, "protein sidecar JSONL");
  export_cmd->add_option("--out", export_out, "embeddings JSONL path");
  export_cmd->add_option("--batch-size", export_batch, "encoding batch size");

  // bench
  CommonArgs bench_common;
  std::string bench_input, bench_variant, bench_out;
  std::size_t bench_synth_count = 256;
  int bench_batch = 0, bench_warmup = -1, bench_repeats = 0;
  bool bench_json = false;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "measure training and inference throughput and memory");
  add_common_options(bench_cmd, bench_common, default_threads);
  bench_cmd->add_option("--input", bench_input, "corpus JSONL (synthetic when omitted)");
  bench_cmd->add_option("--synth-count", bench_synth_count,
                        "synthetic corpus size when no input is given");
  bench_cmd->add_option("--batch-size", bench_batch, "benchmark batch size");
  bench_cmd->add_option("--warmup", bench_warmup, "warmup batches before timing");
  bench_cmd->add_option("--repeats", bench_repeats, "timed repeats (median reported)");
  bench_cmd->add_option("--variant", bench_variant,
                        "hierarchical, single_pass or mono_only");
  bench_cmd->add_option("--out", bench_out, "report JSON path");
  bench_cmd->add_flag("--json", bench_json, "print JSON instead of the table");

  // gradcheck
  CommonArgs grad_common;
  std::string grad_glycan = "Gal(b1-4)Glc", grad_out;
  int grad_hidden = 16;
  double grad_tolerance = 1e-3, grad_step = 1e-4;
  CLI::App* grad_cmd = app.add_subcommand(
      "gradcheck", "compare analytic gradients against finite differences");
  add_common_options(grad_cmd, grad_common, default_threads);
  grad_cmd->add_option("--glycan", grad_glycan, "structure to run the check on");
  grad_cmd->add_option("--hidden", grad_hidden, "hidden width of the tiny model");
  grad_cmd->add_option("--tolerance", grad_tolerance, "max allowed relative error");
  grad_cmd->add_option("--step", grad_step, "finite-difference step");
  grad_cmd->add_option("--out", grad_out, "report JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    const int code = app.exit(error);
    return code == 0 ? 0 : 1;
  }

  try {
    if (parse_cmd->parsed()) {
      return cmd_parse(parse_text, parse_from_file, parse_stats_only, !parse_strict);
    }
    if (curate_cmd->parsed()) {
      return cmd_curate(curate_common, curate_input, curate_downstream, curate_out,
                        curate_report);
    }
    if (synth_cmd->parsed()) {
      return cmd_synth(synth_kind, synth_count, synth_seed, synth_out, synth_proteins_out,
                       synth_classes, synth_min, synth_max, synth_num_proteins,
                       synth_protein_dim, synth_fractions);
    }
    if (pretrain_cmd->parsed()) {
      return cmd_pretrain(pretrain_common, pretrain_input, pretrain_ckpt, pretrain_metrics,
                          pretrain_summary);
    }
    if (train_cmd->parsed()) {
      return cmd_train(train_common, train_input, train_proteins, train_warm, train_ckpt,
                       train_metrics, train_summary);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(eval_common, eval_ckpt, eval_input, eval_proteins, eval_split,
                      eval_predictions, eval_out);
    }
    if (export_cmd->parsed()) {
      return cmd_export(export_common, export_ckpt, export_input, export_proteins, export_out,
                        export_batch);
    }
    if (bench_cmd->parsed()) {
      return cmd_bench(bench_common, bench_input, bench_synth_count, bench_batch, bench_warmup,
                       bench_repeats, bench_variant, bench_out, bench_json);
    }
    if (grad_cmd->parsed()) {
      return cmd_gradcheck(grad_common, grad_glycan, grad_hidden, grad_tolerance, grad_step,
                           grad_out);
    }
    return fail(1, "usage", "no command given");
  } catch (const ConfigError& error) {
    return fail(1, "config", error.what());
  } catch (const ParseError& error) {
    return fail(2, "parse", error.what());
  } catch (const NumericError& error) {
    return fail(3, "numeric", error.what());
  } catch (const TapeError& error) {
    return fail(3, "numeric", error.what());
  } catch (const Error& error) {
    return fail(2, "data", error.what());
  } catch (const std::exception& error) {
    return fail(1, "internal", error.what());
  }
}

}  // namespace
}  // namespace glyforge

int main(int argc, char** argv) { return glyforge::dispatch(argc, argv); }
