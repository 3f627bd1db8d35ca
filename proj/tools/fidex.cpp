// fidex: prepare, train, evaluate, analyze and synth subcommands.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical abort.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fidex/corpus.hpp"
#include "fidex/decodeparse.hpp"
#include "fidex/harness.hpp"
#include "fidex/util.hpp"
#include "json.hpp"

namespace {

using namespace fidex;

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string fewshot;
  std::string init_from;
  std::string stage;
  std::vector<std::string> overrides;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "Run config (flat JSON object)");
  cmd->add_option("--seed", f.seed, "Override the config seed");
  cmd->add_option("--set", f.overrides, "Override one config key, KEY=VALUE")->type_name("KEY=VALUE");
}

// Defaults, then task defaults, then the config file, then flags.
RunConfig resolve_config(const RunFlags& f) {
  RunConfig cfg = f.config.empty() ? default_run_config() : load_run_config(f.config);
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects KEY=VALUE, got '" + kv + "'");
    const std::string key = kv.substr(0, eq), raw = kv.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    apply_config_json(cfg, nlohmann::json{{key, value}}.dump(), "--set");
  }
  if (f.seed) cfg.set_seed(*f.seed);
  if (!f.fewshot.empty()) cfg.fewshot = FewShotBudget::parse(f.fewshot);
  if (!f.init_from.empty()) cfg.init_from = f.init_from;
  if (!f.stage.empty()) cfg.stage = f.stage;
  return cfg;
}

int run(int argc, char** argv) {
  CLI::App app{"Extractive rationale generation with a fusion-in-decoder model"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Restructure QA records into rationale examples");
  std::vector<std::string> span_paths, multidoc_paths;
  std::string prepare_out, prepare_state;
  std::uint64_t prepare_seed = 0;
  prepare->add_option("--span-qa", span_paths, "Answer-span QA record files");
  prepare->add_option("--multidoc", multidoc_paths, "Multi-document QA record files");
  prepare->add_option("--out", prepare_out, "Output example file")->required();
  prepare->add_option("--seed", prepare_seed, "Shuffle seed");
  prepare->add_option("--state", prepare_state, "Pipeline state file to update");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train and keep the best validation checkpoint");
  RunFlags train_flags;
  add_run_flags(train_cmd, train_flags);
  train_cmd->add_option("--fewshot", train_flags.fewshot, "Fraction (0.25) or count (2000) of training examples");
  train_cmd->add_option("--init-from", train_flags.init_from, "Checkpoint to continue from");
  train_cmd->add_option("--stage", train_flags.stage, "intermediate or target")
      ->check(CLI::IsMember({"intermediate", "target"}));
  std::string train_out;
  train_cmd->add_option("--out", train_out, "Checkpoint path (overrides the config)");
  bool quiet = false;
  train_cmd->add_flag("--quiet", quiet, "No progress lines");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Decode a split and score it");
  RunFlags eval_flags;
  add_run_flags(eval_cmd, eval_flags);
  std::string split = "test", eval_out;
  bool gold_replay = false;
  eval_cmd->add_option("--split", split, "Split to evaluate")->check(CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_option("--out", eval_out, "Report path (overrides the config)");
  eval_cmd->add_flag("--gold-replay", gold_replay, "Score the gold annotations as predictions");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Categorize non-perfect rationale predictions");
  RunFlags analyze_flags;
  add_run_flags(analyze, analyze_flags);
  std::string examples_path, predictions_path, chunk_meta_path, adequacy_path, analyze_out;
  std::string analyze_split = "test";
  std::size_t sample = 0;
  analyze->add_option("--split", analyze_split, "Split whose examples to read when --examples is absent")
      ->check(CLI::IsMember({"train", "val", "test"}));
  analyze->add_option("--examples", examples_path, "Example file");
  analyze->add_option("--predictions", predictions_path, "Prediction dump");
  analyze->add_option("--chunk-meta", chunk_meta_path, "Chunk metadata written by evaluate");
  analyze->add_option("--adequacy", adequacy_path, "Optional adequacy judgments");
  analyze->add_option("--sample", sample, "Analyze a seeded sample of this many examples");
  analyze->add_option("--out", analyze_out, "Write the report here instead of stdout");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate the synthetic keyword task");
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  SynthSizes sizes;
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--train-size", sizes.train, "Training examples")->check(CLI::PositiveNumber);
  synth->add_option("--val-size", sizes.val, "Validation examples")->check(CLI::PositiveNumber);
  synth->add_option("--test-size", sizes.test, "Test examples")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (prepare->parsed()) {
    const PrepareResult r = cmd_prepare(span_paths, multidoc_paths, prepare_out, prepare_seed, &std::cerr, prepare_state);
    std::cout << "records " << r.records << " failed " << r.failed << " examples " << r.examples
              << " skipped_documents " << r.skipped_documents << "\n";
  } else if (train_cmd->parsed()) {
    RunConfig cfg = resolve_config(train_flags);
    if (!train_out.empty()) cfg.checkpoint_path = train_out;
    if (cfg.schedule.lr != 1e-4 && cfg.schedule.lr != 1e-5)
      std::cerr << "warning: lr " << cfg.schedule.lr << " is outside the usual {1e-4, 1e-5}\n";
    ProgressFn progress;
    if (!quiet)
      progress = [](const LogEntry& e) {
        std::printf("step %zu loss %.4f val_em %.4f val_tf1 %.4f\n", e.step, e.loss, e.val_em, e.val_tf1);
        std::fflush(stdout);
      };
    const TrainOutcome out = cmd_train(cfg, progress);
    std::printf("trained on %zu examples; best step %zu val_tf1 %.4f\n", out.train_examples, out.best_step,
                out.best_val_tf1);
  } else if (eval_cmd->parsed()) {
    RunConfig cfg = resolve_config(eval_flags);
    if (!eval_out.empty()) cfg.report_path = eval_out;
    const EvalOutcome out = cmd_evaluate(cfg, split, gold_replay);
    std::printf("n %zu em %.4f rf1 %.4f tf1 %.4f iou_f1 %.4f\n", out.report.n, out.report.em, out.report.rf1,
                out.report.tf1, out.report.iou_f1);
  } else if (analyze->parsed()) {
    const RunConfig cfg = resolve_config(analyze_flags);
    if (examples_path.empty()) examples_path = split_path(cfg, analyze_split);
    if (predictions_path.empty()) predictions_path = cfg.predictions_path;
    if (chunk_meta_path.empty()) chunk_meta_path = cfg.chunk_meta_path;
    if (examples_path.empty() || predictions_path.empty() || chunk_meta_path.empty())
      throw UsageError("analyze needs examples, predictions and chunk metadata paths");
    AnalyzeOptions opts{adequacy_path, sample, cfg.seed};
    const AnalysisReport report =
        cmd_analyze(load_examples(examples_path), load_predictions(predictions_path), load_chunk_meta(chunk_meta_path), opts);
    if (analyze_out.empty())
      std::cout << report.to_json() << "\n";
    else
      write_file(analyze_out, report.to_json() + "\n");
  } else if (synth->parsed()) {
    cmd_synth(synth_seed, sizes, synth_out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const fidex::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const fidex::NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
