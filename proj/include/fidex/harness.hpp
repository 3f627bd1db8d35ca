#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fidex/corpus.hpp"
#include "fidex/erroranalysis.hpp"
#include "fidex/metrics.hpp"
#include "fidex/model.hpp"
#include "fidex/train.hpp"

namespace fidex {

/// Flat run configuration. Precedence, lowest first: built-in defaults,
/// per-task defaults, config file keys, command-line flags.
struct RunConfig {
  std::string task;

  std::string train_path;
  std::string val_path;
  std::string test_path;
  std::string vocab_path;
  std::string checkpoint_path;
  std::string log_path;
  std::string report_path;
  std::string predictions_path;
  std::string chunk_meta_path;
  std::string state_path;

  /// model.vocab_size is filled from the vocabulary at train time.
  ModelConfig model;
  /// Upper bound on the built vocabulary, reserved tokens included.
  std::size_t vocab_size = Vocabulary::kDefaultMaxSize;
  std::size_t max_markers = Vocabulary::kDefaultMaxMarkers;
  /// Number of encoder chunks (C).
  std::size_t contexts = 1;
  Schedule schedule;
  std::optional<FewShotBudget> fewshot;
  std::uint64_t seed = 0;

  std::string init_from;
  /// "intermediate" or "target".
  std::string stage = "target";

  /// Sets seed in every place that consumes it.
  void set_seed(std::uint64_t s);
};

/// Built-in defaults with the per-task overrides for `task` applied.
RunConfig default_run_config(const std::string& task = "");

/// Config file: one flat JSON object. Unknown keys are a UsageError.
RunConfig parse_run_config(std::string_view text, const std::string& source = "<memory>");
RunConfig load_run_config(const std::string& path);
/// Applies the keys of a flat JSON object on top of `cfg`.
void apply_config_json(RunConfig& cfg, std::string_view text, const std::string& source);
std::string run_config_to_json(const RunConfig& cfg);

/// Non-empty paths must be pairwise distinct; throws UsageError.
void validate(const RunConfig& cfg);

struct LineageEntry {
  std::string stage;
  std::string checkpoint;
  std::string init_from;

  bool operator==(const LineageEntry&) const = default;
};

struct PipelineState {
  /// Subset of prepared, intermediate_trained, target_trained, evaluated in
  /// the order reached.
  std::vector<std::string> stages;
  std::vector<LineageEntry> lineage;

  bool reached(std::string_view stage) const;
  void mark(const std::string& stage);
};

PipelineState load_pipeline_state(const std::string& path);
void save_pipeline_state(const PipelineState& state, const std::string& path);

// ---------------------------------------------------------------------------
// Commands

struct PrepareResult {
  std::size_t records = 0;
  std::size_t failed = 0;
  std::size_t examples = 0;
  std::size_t skipped_documents = 0;
};

/// Restructures span-QA and multi-doc QA files into one shuffled example
/// file. Bad records are reported on `log` and skipped; more than 10%
/// failures is a DataError (nothing is written then).
PrepareResult cmd_prepare(const std::vector<std::string>& span_qa_paths,
                          const std::vector<std::string>& multidoc_paths, const std::string& out_path,
                          std::uint64_t seed, std::ostream* log = nullptr, const std::string& state_path = "");

struct TrainOutcome {
  std::size_t train_examples = 0;
  std::size_t best_step = 0;
  double best_val_tf1 = 0.0;
  std::vector<LogEntry> log;
};

/// Builds or loads the vocabulary, optionally loads init_from, applies the
/// few-shot budget, trains and writes the best checkpoint plus a log.
TrainOutcome cmd_train(const RunConfig& cfg, const ProgressFn& progress = {});

/// Training split after the few-shot budget is applied.
std::vector<Example> training_examples(const RunConfig& cfg);

struct EvalOutcome {
  EvalReport report;
  std::vector<PredictionRecord> predictions;
  std::vector<ChunkMeta> chunk_meta;
};

/// Decodes and scores one split. With gold_replay the gold annotations are
/// scored as predictions and no checkpoint is read.
EvalOutcome cmd_evaluate(const RunConfig& cfg, const std::string& split, bool gold_replay = false);

std::string split_path(const RunConfig& cfg, const std::string& split);

std::string to_json_line(const ChunkMeta& m);
std::vector<ChunkMeta> load_chunk_meta(const std::string& path);
void save_chunk_meta(const std::vector<ChunkMeta>& meta, const std::string& path);

struct AnalyzedExample {
  std::string id;
  ErrorCategory category;
  IndexSet gold;
  IndexSet pred;
};

struct AnalysisReport {
  /// Non-perfect examples (RF1 < 1) that were analyzed, in id order.
  std::vector<AnalyzedExample> examples;
  FrequencyTable table;

  std::string to_json() const;
};

struct AnalyzeOptions {
  std::string adequacy_path;
  /// 0 analyzes every non-perfect example.
  std::size_t sample = 0;
  std::uint64_t seed = 0;
};

AnalysisReport cmd_analyze(const std::vector<Example>& examples, const std::vector<PredictionRecord>& predictions,
                           const std::vector<ChunkMeta>& chunk_meta, const AnalyzeOptions& opts = {});

struct SynthSizes {
  std::size_t train = 1000;
  std::size_t val = 200;
  std::size_t test = 200;
};

/// Writes train.jsonl, val.jsonl and test.jsonl under out_dir. The three
/// splits come from independent seeds and carry distinct id prefixes.
void cmd_synth(std::uint64_t seed, const SynthSizes& sizes, const std::string& out_dir);

}  // namespace fidex
