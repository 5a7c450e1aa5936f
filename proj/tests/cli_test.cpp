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

// End-to-end checks of the command-line binary: every test spawns the real
// executable and inspects its exit code, stdout, stderr and artifacts.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "glyforge/io.hpp"
#include "test_util.hpp"

namespace glyforge {
using glyforge_test::TempDir;
namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const TempDir& dir, const std::string& args) {
  const std::string out_path = dir.file("cli_stdout.txt");
  const std::string err_path = dir.file("cli_stderr.txt");
  const std::string command = std::string(GLYFORGE_CLI_PATH) + " " + args + " > " + out_path +
                              " 2> " + err_path;
  const int status = std::system(command.c_str());
  CliResult result;
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  if (std::filesystem::exists(out_path)) result.out = read_file(out_path);
  if (std::filesystem::exists(err_path)) result.err = read_file(err_path);
  return result;
}

Json first_json(const std::string& text) { return parse_json(text, "cli output"); }

TEST(CliParse, EmitsCanonicalFormAndGraphCounts) {
  TempDir dir("cli_parse");
  const CliResult result = run_cli(dir, "parse \"Gal(b1-4)Glc\"");
  ASSERT_EQ(result.exit_code, 0) << result.err;
  const Json row = first_json(result.out);
  EXPECT_EQ(row.at("canonical"), "Gal(b1-4)Glc");
  EXPECT_EQ(row.at("N"), 24);
  EXPECT_EQ(row.at("M"), 2);
  EXPECT_EQ(row.at("e_mm"), 2);
}

TEST(CliParse, StatsOnlyOmitsTheCanonicalForm) {
  TempDir dir("cli_parse_stats");
  const CliResult result = run_cli(dir, "parse --stats-only \"Gal(b1-4)Glc\"");
  ASSERT_EQ(result.exit_code, 0) << result.err;
  const Json row = first_json(result.out);
  EXPECT_FALSE(row.contains("canonical"));
  EXPECT_EQ(row.at("N"), 24);
}

TEST(CliParse, MalformedInputExitsTwoWithErrorJson) {
  TempDir dir("cli_parse_bad");
  const CliResult result = run_cli(dir, "parse \"Gal(b1-\"");
  EXPECT_EQ(result.exit_code, 2);
  EXPECT_TRUE(result.out.empty());
  const Json error = first_json(result.err);
  EXPECT_EQ(error.at("error").at("type"), "parse");
}

TEST(CliExitCodes, ConfigProblemsExitOneBeforeAnyOutput) {
  TempDir dir("cli_exit_one");
  // Missing checkpoint: validated before compute, no partial predictions.
  const std::string data = dir.file("data.jsonl");
  write_file(data, "{\"glycan\":\"Gal(b1-4)Glc\",\"label\":0,\"split\":\"test\"}\n");
  const std::string predictions = dir.file("predictions.jsonl");
  const CliResult eval = run_cli(dir, "eval --checkpoint " + dir.file("absent.ckpt") +
                                          " --input " + data + " --predictions " + predictions);
  EXPECT_EQ(eval.exit_code, 1);
  EXPECT_FALSE(std::filesystem::exists(predictions));
  EXPECT_EQ(first_json(eval.err).at("error").at("type"), "config");

  // Invalid hyperparameter: rejected by validation, also exit 1.
  const std::string corpus = dir.file("corpus.jsonl");
  write_file(corpus, "{\"glycan\":\"Gal(b1-4)Glc\"}\n");
  const CliResult pretrain =
      run_cli(dir, "pretrain --input " + corpus + " --set pretrain.epochs=0");
  EXPECT_EQ(pretrain.exit_code, 1);

  // Unknown usage: exit 1 as well.
  EXPECT_EQ(run_cli(dir, "no-such-command").exit_code, 1);
}

TEST(CliExitCodes, DataProblemsExitTwo) {
  TempDir dir("cli_exit_two");
  const std::string corpus = dir.file("broken.jsonl");
  write_file(corpus, "{\"note\":\"no glycan field\"}\n");
  const CliResult result = run_cli(dir, "pretrain --input " + corpus);
  EXPECT_EQ(result.exit_code, 2);
  EXPECT_EQ(first_json(result.err).at("error").at("type"), "data");
}

TEST(CliExitCodes, FailedGradientCheckExitsThree) {
  TempDir dir("cli_exit_three");
  // An impossible tolerance forces the failure path deterministically.
  const CliResult result = run_cli(dir, "gradcheck --tolerance 1e-14");
  EXPECT_EQ(result.exit_code, 3);
  EXPECT_EQ(first_json(result.err).at("error").at("type"), "numeric");
  // The report itself is still written, with passed=false.
  EXPECT_FALSE(first_json(result.out).at("passed").get<bool>());
}

TEST(CliGradcheck, DefaultTinyModelPasses) {
  TempDir dir("cli_gradcheck");
  const CliResult result = run_cli(dir, "gradcheck");
  ASSERT_EQ(result.exit_code, 0) << result.err;
  const Json report = first_json(result.out);
  EXPECT_TRUE(report.at("passed").get<bool>());
  EXPECT_LT(report.at("max_rel_err").get<double>(), 1e-3);
  EXPECT_EQ(report.at("seed"), 0);
}

TEST(CliSynth, GeneratorsWriteParseableCorpora) {
  TempDir dir("cli_synth");
  const std::string corpus = dir.file("corpus.jsonl");
  ASSERT_EQ(run_cli(dir, "synth --kind corpus --count 12 --seed 3 --out " + corpus).exit_code,
            0);
  EXPECT_EQ(read_jsonl(corpus).size(), 12u);
  // Every generated structure round-trips through the parser.
  const CliResult parsed = run_cli(dir, "parse --file " + corpus + " --stats-only");
  EXPECT_EQ(parsed.exit_code, 0);

  const std::string tax = dir.file("tax.jsonl");
  ASSERT_EQ(run_cli(dir, "synth --kind taxonomy --count 16 --classes 4 --seed 5 --out " + tax)
                .exit_code,
            0);
  for (const auto& row : read_jsonl(tax)) {
    EXPECT_TRUE(row.contains("glycan"));
    EXPECT_TRUE(row.contains("label"));
    EXPECT_TRUE(row.contains("split"));
  }
}

TEST(CliCurate, ReportsTheRejectionLedger) {
  TempDir dir("cli_curate");
  const std::string raw = dir.file("raw.jsonl");
  write_file(raw,
             "{\"glycan\":\"Gal(b1-4\"}\n"
             "{\"glycan\":\"Gal(b1-4)Glc\",\"components\":2}\n"
             "{\"glycan\":\"Man(a1-3)Man\"}\n"
             "{\"glycan\":\"Fuc(a1-2)Gal\"}\n");
  const std::string heldout = dir.file("heldout.jsonl");
  write_file(heldout, "{\"glycan\":\"Man(a1-3)Man\"}\n");
  const std::string kept = dir.file("kept.jsonl");
  const CliResult result = run_cli(
      dir, "curate --input " + raw + " --downstream " + heldout + " --out " + kept);
  ASSERT_EQ(result.exit_code, 0) << result.err;
  const Json report = first_json(result.out);
  EXPECT_EQ(report.at("input"), 4);
  EXPECT_EQ(report.at("kept"), 1);
  EXPECT_EQ(report.at("rejected_quality"), 1);
  EXPECT_EQ(report.at("rejected_integrity"), 1);
  EXPECT_EQ(report.at("rejected_leakage"), 1);
  EXPECT_EQ(read_jsonl(kept).size(), 1u);
}

TEST(CliCurate, RefusesToOverwriteItsInput) {
  TempDir dir("cli_curate_guard");
  const std::string raw = dir.file("raw.jsonl");
  write_file(raw, "{\"glycan\":\"Gal(b1-4)Glc\"}\n");
  const CliResult result = run_cli(dir, "curate --input " + raw + " --out " + raw);
  EXPECT_EQ(result.exit_code, 1);
  // The input survives untouched.
  EXPECT_EQ(read_file(raw), "{\"glycan\":\"Gal(b1-4)Glc\"}\n");
}

// The full artifact chain at desk scale: synthesize, pretrain, fine-tune
// from the checkpoint, evaluate, and export embeddings.
TEST(CliPipeline, PretrainTrainEvalExportChainSucceeds) {
  TempDir dir("cli_pipeline");
  const std::string small = " --set model.hidden_dim=16 --set model.num_blocks=1";
  const std::string corpus = dir.file("corpus.jsonl");
  ASSERT_EQ(run_cli(dir, "synth --kind corpus --count 24 --seed 1 --out " + corpus).exit_code,
            0);
  const std::string tax = dir.file("tax.jsonl");
  ASSERT_EQ(
      run_cli(dir, "synth --kind taxonomy --count 24 --classes 3 --seed 2 --out " + tax)
          .exit_code,
      0);

  const std::string pre_ckpt = dir.file("pre.ckpt");
  ASSERT_EQ(run_cli(dir, "pretrain --input " + corpus + " --checkpoint " + pre_ckpt +
                             " --seed 0 --set pretrain.epochs=2 --set pretrain.batch_size=8" +
                             small)
                .exit_code,
            0);

  const std::string task = " --set task.kind=multiclass --set task.num_classes=3"
                           " --set task.epochs=2 --set task.batch_size=8";
  const std::string ft_ckpt = dir.file("ft.ckpt");
  const CliResult train = run_cli(dir, "train --input " + tax + " --warm-start " + pre_ckpt +
                                           " --checkpoint " + ft_ckpt + " --seed 0" + task);
  ASSERT_EQ(train.exit_code, 0) << train.err;
  const Json summary = first_json(train.out);
  EXPECT_EQ(summary.at("mode"), "pretrained");
  EXPECT_EQ(summary.at("runs").size(), 1u);
  EXPECT_TRUE(summary.at("valid_metric").contains("mean"));

  const CliResult eval = run_cli(dir, "eval --checkpoint " + ft_ckpt + " --input " + tax +
                                          " --split valid" + task);
  ASSERT_EQ(eval.exit_code, 0) << eval.err;
  EXPECT_EQ(first_json(eval.out).at("metric_name"), "macro_f1");

  const std::string emb = dir.file("emb.jsonl");
  ASSERT_EQ(run_cli(dir, "export-embeddings --checkpoint " + ft_ckpt + " --input " + tax +
                             " --out " + emb)
                .exit_code,
            0);
  const auto rows = read_jsonl(emb);
  EXPECT_EQ(rows.size(), 24u);
  EXPECT_EQ(rows.front().at("z_g").size(), 32u);
}

TEST(CliTrain, RepeatedSeedsProduceAMeanStdSummary) {
  TempDir dir("cli_multiseed");
  const std::string tax = dir.file("tax.jsonl");
  ASSERT_EQ(
      run_cli(dir, "synth --kind taxonomy --count 24 --classes 3 --seed 2 --out " + tax)
          .exit_code,
      0);
  const CliResult train = run_cli(
      dir, "train --input " + tax + " --seed 0 --seed 1 --seed 2" +
               " --set model.hidden_dim=16 --set model.num_blocks=1" +
               " --set task.kind=multiclass --set task.num_classes=3" +
               " --set task.epochs=2 --set task.batch_size=8");
  ASSERT_EQ(train.exit_code, 0) << train.err;
  const Json summary = first_json(train.out);
  ASSERT_EQ(summary.at("runs").size(), 3u);
  EXPECT_TRUE(summary.at("valid_metric").contains("mean"));
  EXPECT_TRUE(summary.at("valid_metric").contains("std"));
  EXPECT_GE(summary.at("valid_metric").at("std").get<double>(), 0.0);
}

TEST(CliReproducibility, SameConfigAndSeedGiveByteIdenticalLogs) {
  TempDir dir("cli_repro");
  const std::string corpus = dir.file("corpus.jsonl");
  ASSERT_EQ(run_cli(dir, "synth --kind corpus --count 16 --seed 4 --out " + corpus).exit_code,
            0);
  const std::string args = "pretrain --input " + corpus + " --seed 9" +
                           " --set model.hidden_dim=16 --set model.num_blocks=1" +
                           " --set pretrain.epochs=2 --set pretrain.batch_size=8 --metrics ";
  const std::string first = dir.file("metrics_a.jsonl");
  const std::string second = dir.file("metrics_b.jsonl");
  ASSERT_EQ(run_cli(dir, args + first).exit_code, 0);
  ASSERT_EQ(run_cli(dir, args + second).exit_code, 0);
  EXPECT_EQ(read_file(first), read_file(second));
  EXPECT_FALSE(read_file(first).empty());
}

TEST(CliThreads, EnvironmentVariableSuppliesTheDefault) {
  TempDir dir("cli_threads");
  // The environment default lands in the recorded thread count.
  const std::string out_path = dir.file("bench_stdout.txt");
  const std::string command = std::string("GLYFORGE_THREADS=2 ") + GLYFORGE_CLI_PATH +
                              " bench --synth-count 8 --batch-size 8 --repeats 1 --json" +
                              " --set model.hidden_dim=8 --set model.num_blocks=1 > " +
                              out_path + " 2> " + dir.file("bench_stderr.txt");
  const int status = std::system(command.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  ASSERT_EQ(WEXITSTATUS(status), 0);
  const Json report = first_json(read_file(out_path));
  EXPECT_EQ(report.at("threads"), 2);

  // A malformed value is a config error.
  const std::string bad = std::string("GLYFORGE_THREADS=abc ") + GLYFORGE_CLI_PATH +
                          " gradcheck > /dev/null 2> " + dir.file("bad_stderr.txt");
  const int bad_status = std::system(bad.c_str());
  ASSERT_TRUE(WIFEXITED(bad_status));
  EXPECT_EQ(WEXITSTATUS(bad_status), 1);
}

}  // namespace
}  // namespace glyforge
