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

#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "glyforge/benchkit.hpp"
#include "glyforge/datakit.hpp"
#include "glyforge/encoder.hpp"
#include "glyforge/notation.hpp"
#include "glyforge/structgraph.hpp"

namespace glyforge {
namespace {

// A small corpus assembled once: enough work that a measured pass takes a
// visible slice of time, small enough that the whole suite stays fast.
class BenchkitTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fixture_ = new Fixture();
    const std::vector<std::string> corpus = synth_corpus(48, 7, 2, 5);
    std::vector<GlycanTree> trees;
    for (const auto& text : corpus) trees.push_back(parse_glycan(text));
    auto [mono, linkage] = build_vocabularies(trees);
    fixture_->mono = mono;
    fixture_->linkage = linkage;
    for (const auto& tree : trees) {
      fixture_->graphs.push_back(assemble_graph(tree, fixture_->mono, fixture_->linkage));
    }
  }
  static void TearDownTestSuite() {
    delete fixture_;
    fixture_ = nullptr;
  }

  ModelConfig config(EncoderVariant variant) const {
    ModelConfig c;
    c.hidden_dim = 16;
    c.num_blocks = 1;
    c.variant = variant;
    c.readout = ReadoutScope::mono;
    c.num_atom_types = static_cast<int>(fixture_->atom.size());
    c.num_mono_types = static_cast<int>(fixture_->mono.size());
    c.num_mm_relations = static_cast<int>(fixture_->linkage.num_relations());
    return c;
  }

  BenchReport bench(EncoderVariant variant, int batch_size = 16, int warmup = 1,
                    int repeats = 3) const {
    return run_bench<float>(config(variant), fixture_->graphs, fixture_->atom.unknown_id(),
                            fixture_->mono.unknown_id(), batch_size, warmup, repeats,
                            /*seed=*/11, /*threads=*/1);
  }

  struct Fixture {
    MonoVocab mono;
    LinkageVocab linkage;
    AtomVocab atom;
    std::vector<HeteroGlycanGraph> graphs;
  };
  static Fixture* fixture_;
};

BenchkitTest::Fixture* BenchkitTest::fixture_ = nullptr;

TEST_F(BenchkitTest, ThroughputTimesElapsedRecoversTheSampleCount) {
  const BenchReport report = bench(EncoderVariant::hierarchical);
  ASSERT_EQ(report.samples, fixture_->graphs.size());
  // The reported throughput and elapsed time come from the same repeat, so
  // the identity holds in exact floating point, not just approximately.
  EXPECT_EQ(report.training_throughput,
            static_cast<double>(report.samples) / report.training_elapsed_s);
  EXPECT_EQ(report.inference_throughput,
            static_cast<double>(report.samples) / report.inference_elapsed_s);
  EXPECT_GT(report.training_elapsed_s, 0.0);
  EXPECT_GT(report.inference_elapsed_s, 0.0);
}

TEST_F(BenchkitTest, InferenceOutrunsTraining) {
  const BenchReport report = bench(EncoderVariant::hierarchical);
  // Training adds a backward pass and an optimizer update on the same
  // batches, so the direction of the gap is not a matter of luck.
  EXPECT_GT(report.inference_throughput, report.training_throughput);
}

TEST_F(BenchkitTest, MonoOnlyVariantIsFasterThanHierarchical) {
  const BenchReport full = bench(EncoderVariant::hierarchical);
  const BenchReport mono = bench(EncoderVariant::mono_only);
  EXPECT_EQ(full.variant, "hierarchical");
  EXPECT_EQ(mono.variant, "mono_only");
  // The residue-level variant skips all atom-scale message passing, which
  // is most of the graph, so it must come out ahead in both modes.
  EXPECT_GT(mono.inference_throughput, full.inference_throughput);
  EXPECT_GT(mono.training_throughput, full.training_throughput);
}

TEST_F(BenchkitTest, AccountingFieldsDescribeTheRun) {
  const BenchReport report = bench(EncoderVariant::single_pass, /*batch_size=*/16,
                                   /*warmup=*/2, /*repeats=*/5);
  EXPECT_EQ(report.batch_size, 16);
  EXPECT_EQ(report.warmup_batches, 2);
  EXPECT_EQ(report.repeats, 5);
  EXPECT_EQ(report.threads, 1);
  EXPECT_EQ(report.variant, "single_pass");
  // 48 graphs in batches of 16.
  EXPECT_EQ(report.measured_batches, 3);
  // An uneven batch size leaves a short tail batch but the same total.
  const BenchReport uneven = bench(EncoderVariant::single_pass, /*batch_size=*/20);
  EXPECT_EQ(uneven.measured_batches, 3);
  EXPECT_EQ(uneven.samples, 48u);
}

TEST_F(BenchkitTest, PeakMemoryIsPositiveAndRssIsAtLeastAsLarge) {
  const BenchReport report = bench(EncoderVariant::hierarchical);
  EXPECT_GT(report.training_peak_mem_mib, 0.0);
  EXPECT_GT(report.inference_peak_mem_mib, 0.0);
  // Training keeps the tape alive for the backward pass; inference does not.
  EXPECT_GE(report.training_peak_mem_mib, report.inference_peak_mem_mib);
  // The process high-water mark counts code, stacks, and the allocator's
  // own overhead on top of tensor payloads.
  EXPECT_GE(report.rss_peak_mib, report.training_peak_mem_mib);
  EXPECT_GT(report.rss_peak_mib, 0.0);
}

TEST_F(BenchkitTest, JsonCarriesEveryField) {
  const BenchReport report = bench(EncoderVariant::hierarchical);
  const Json j = report.to_json();
  for (const char* key :
       {"variant", "samples", "training_throughput", "inference_throughput",
        "training_elapsed_s", "inference_elapsed_s", "training_throughput_std",
        "inference_throughput_std", "training_peak_mem_mib", "inference_peak_mem_mib",
        "rss_peak_mib", "batch_size", "warmup_batches", "measured_batches", "repeats",
        "threads"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["variant"], "hierarchical");
  EXPECT_EQ(j["samples"].get<std::size_t>(), fixture_->graphs.size());
  EXPECT_DOUBLE_EQ(j["training_throughput"].get<double>(), report.training_throughput);
}

TEST_F(BenchkitTest, TableNamesTheVariantAndBothModes) {
  const BenchReport report = bench(EncoderVariant::hierarchical);
  const std::string table = report.table();
  EXPECT_NE(table.find("hierarchical"), std::string::npos);
  EXPECT_NE(table.find("training"), std::string::npos);
  EXPECT_NE(table.find("inference"), std::string::npos);
  EXPECT_NE(table.find("samples/s"), std::string::npos);
}

TEST_F(BenchkitTest, RejectsEmptyDataAndBadKnobs) {
  const std::vector<HeteroGlycanGraph> empty;
  EXPECT_THROW(run_bench<float>(config(EncoderVariant::hierarchical), empty,
                                fixture_->atom.unknown_id(), fixture_->mono.unknown_id()),
               DataError);
  EXPECT_THROW(bench(EncoderVariant::hierarchical, /*batch_size=*/0), ConfigError);
  EXPECT_THROW(bench(EncoderVariant::hierarchical, 16, /*warmup=*/-1), ConfigError);
  EXPECT_THROW(bench(EncoderVariant::hierarchical, 16, 1, /*repeats=*/0), ConfigError);
}

}  // namespace
}  // namespace glyforge
