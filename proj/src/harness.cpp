#include "fidex/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <ostream>
#include <set>

#include "fidex/checkpoint.hpp"
#include "fidex/decodeparse.hpp"
#include "fidex/textproc.hpp"
#include "json.hpp"

namespace fidex {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  model.seed = s;
  schedule.seed = s;
}

RunConfig default_run_config(const std::string& task) {
  RunConfig cfg;
  cfg.task = task;
  if (task == "multirc") cfg.model.context_length = 1024;
  if (task == "boolq" || task == "evidence_inference")
    cfg.contexts = 10;
  else if (task == "movies")
    cfg.contexts = 6;
  return cfg;
}

namespace {

template <class T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw UsageError("config key '" + key + "' has the wrong type");
  }
}

json parse_config_object(std::string_view text, const std::string& source) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(source + ": malformed config: " + e.what());
  }
  if (!obj.is_object()) throw UsageError(source + ": config must be a JSON object");
  for (const auto& [k, v] : obj.items())
    if (v.is_object() || v.is_array()) throw UsageError(source + ": config key '" + k + "' must be a scalar");
  return obj;
}

}  // namespace

void apply_config_json(RunConfig& cfg, std::string_view text, const std::string& source) {
  const json obj = parse_config_object(text, source);
  for (const auto& [key, v] : obj.items()) {
    auto str = [&] { return get_as<std::string>(v, key); };
    auto size = [&] { return get_as<std::size_t>(v, key); };
    if (key == "task") {
      cfg.task = str();
    } else if (key == "train") {
      cfg.train_path = str();
    } else if (key == "val") {
      cfg.val_path = str();
    } else if (key == "test") {
      cfg.test_path = str();
    } else if (key == "vocab") {
      cfg.vocab_path = str();
    } else if (key == "checkpoint") {
      cfg.checkpoint_path = str();
    } else if (key == "log") {
      cfg.log_path = str();
    } else if (key == "report") {
      cfg.report_path = str();
    } else if (key == "predictions") {
      cfg.predictions_path = str();
    } else if (key == "chunk_meta") {
      cfg.chunk_meta_path = str();
    } else if (key == "state") {
      cfg.state_path = str();
    } else if (key == "d_model") {
      cfg.model.d_model = size();
    } else if (key == "n_heads") {
      cfg.model.n_heads = size();
    } else if (key == "n_enc_layers") {
      cfg.model.n_enc_layers = size();
    } else if (key == "n_dec_layers") {
      cfg.model.n_dec_layers = size();
    } else if (key == "d_ffn") {
      cfg.model.d_ffn = size();
    } else if (key == "max_target_len") {
      cfg.model.max_target_len = size();
    } else if (key == "dropout") {
      cfg.model.dropout_rate = get_as<double>(v, key);
    } else if (key == "vocab_size") {
      cfg.vocab_size = size();
    } else if (key == "max_markers") {
      cfg.max_markers = size();
    } else if (key == "context_length") {
      cfg.model.context_length = size();
    } else if (key == "contexts") {
      cfg.contexts = size();
    } else if (key == "lr") {
      cfg.schedule.lr = get_as<double>(v, key);
    } else if (key == "total_steps") {
      cfg.schedule.total_steps = size();
    } else if (key == "batch_size") {
      cfg.schedule.batch_size = size();
    } else if (key == "eval_every") {
      cfg.schedule.eval_every = size();
    } else if (key == "lr_decay") {
      cfg.schedule.lr_decay = get_as<bool>(v, key);
    } else if (key == "fewshot") {
      if (v.is_null())
        cfg.fewshot.reset();
      else if (v.is_string())
        cfg.fewshot = FewShotBudget::parse(v.get<std::string>());
      else if (v.is_number_integer())
        cfg.fewshot = FewShotBudget::count(v.get<std::size_t>());
      else
        cfg.fewshot = FewShotBudget::fraction(get_as<double>(v, key));
    } else if (key == "seed") {
      cfg.set_seed(get_as<std::uint64_t>(v, key));
    } else if (key == "init_from") {
      cfg.init_from = str();
    } else if (key == "stage") {
      cfg.stage = str();
    } else {
      throw UsageError(source + ": unknown config key '" + key + "'");
    }
  }
}

RunConfig parse_run_config(std::string_view text, const std::string& source) {
  // The task picks the defaults the other keys override.
  const json obj = parse_config_object(text, source);
  RunConfig cfg = default_run_config(obj.contains("task") ? get_as<std::string>(obj["task"], "task") : "");
  apply_config_json(cfg, text, source);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  if (!file_exists(path)) throw UsageError("config file not found: " + path);
  return parse_run_config(read_file(path), path);
}

std::string run_config_to_json(const RunConfig& c) {
  ordered_json o;
  o["task"] = c.task;
  o["train"] = c.train_path;
  o["val"] = c.val_path;
  o["test"] = c.test_path;
  o["vocab"] = c.vocab_path;
  o["checkpoint"] = c.checkpoint_path;
  o["log"] = c.log_path;
  o["report"] = c.report_path;
  o["predictions"] = c.predictions_path;
  o["chunk_meta"] = c.chunk_meta_path;
  o["state"] = c.state_path;
  o["d_model"] = c.model.d_model;
  o["n_heads"] = c.model.n_heads;
  o["n_enc_layers"] = c.model.n_enc_layers;
  o["n_dec_layers"] = c.model.n_dec_layers;
  o["d_ffn"] = c.model.d_ffn;
  o["max_target_len"] = c.model.max_target_len;
  o["dropout"] = c.model.dropout_rate;
  o["vocab_size"] = c.vocab_size;
  o["max_markers"] = c.max_markers;
  o["context_length"] = c.model.context_length;
  o["contexts"] = c.contexts;
  o["lr"] = c.schedule.lr;
  o["total_steps"] = c.schedule.total_steps;
  o["batch_size"] = c.schedule.batch_size;
  o["eval_every"] = c.schedule.eval_every;
  o["lr_decay"] = c.schedule.lr_decay;
  if (c.fewshot) {
    if (const double* f = std::get_if<double>(&c.fewshot->value))
      o["fewshot"] = *f;
    else
      o["fewshot"] = std::get<std::size_t>(c.fewshot->value);
  } else {
    o["fewshot"] = nullptr;
  }
  o["seed"] = c.seed;
  o["init_from"] = c.init_from;
  o["stage"] = c.stage;
  return o.dump(2);
}

void validate(const RunConfig& cfg) {
  const std::pair<const char*, const std::string*> paths[] = {
      {"train", &cfg.train_path},           {"val", &cfg.val_path},
      {"test", &cfg.test_path},             {"vocab", &cfg.vocab_path},
      {"checkpoint", &cfg.checkpoint_path}, {"log", &cfg.log_path},
      {"report", &cfg.report_path},         {"predictions", &cfg.predictions_path},
      {"chunk_meta", &cfg.chunk_meta_path}, {"state", &cfg.state_path},
  };
  for (std::size_t i = 0; i < std::size(paths); ++i) {
    if (paths[i].second->empty()) continue;
    const auto a = std::filesystem::path(*paths[i].second).lexically_normal();
    for (std::size_t j = i + 1; j < std::size(paths); ++j) {
      if (paths[j].second->empty()) continue;
      if (a == std::filesystem::path(*paths[j].second).lexically_normal())
        throw UsageError(std::string("config paths '") + paths[i].first + "' and '" + paths[j].first +
                         "' are the same: " + *paths[i].second);
    }
  }
  if (cfg.contexts == 0) throw UsageError("contexts must be positive");
  if (cfg.stage != "intermediate" && cfg.stage != "target")
    throw UsageError("stage must be 'intermediate' or 'target', got '" + cfg.stage + "'");
}

// ---------------------------------------------------------------------------
// Pipeline state

bool PipelineState::reached(std::string_view stage) const {
  return std::find(stages.begin(), stages.end(), stage) != stages.end();
}

void PipelineState::mark(const std::string& stage) {
  if (!reached(stage)) stages.push_back(stage);
}

PipelineState load_pipeline_state(const std::string& path) {
  PipelineState s;
  if (path.empty() || !file_exists(path)) return s;
  try {
    const json obj = json::parse(read_file(path));
    s.stages = obj.at("stages").get<std::vector<std::string>>();
    for (const auto& e : obj.at("lineage"))
      s.lineage.push_back({e.at("stage").get<std::string>(), e.at("checkpoint").get<std::string>(),
                           e.at("init_from").get<std::string>()});
  } catch (const json::exception& e) {
    throw DataError("malformed pipeline state " + path + ": " + e.what());
  }
  return s;
}

void save_pipeline_state(const PipelineState& state, const std::string& path) {
  ordered_json obj;
  obj["stages"] = state.stages;
  obj["lineage"] = ordered_json::array();
  for (const auto& e : state.lineage)
    obj["lineage"].push_back({{"stage", e.stage}, {"checkpoint", e.checkpoint}, {"init_from", e.init_from}});
  write_file(path, obj.dump(2) + "\n");
}

namespace {

void record_stage(const std::string& state_path, const std::string& stage, const LineageEntry* lineage = nullptr) {
  if (state_path.empty()) return;
  PipelineState s = load_pipeline_state(state_path);
  s.mark(stage);
  if (lineage) s.lineage.push_back(*lineage);
  save_pipeline_state(s, state_path);
}

template <class F>
void for_each_line(const std::string& path, F&& f) {
  if (!file_exists(path)) throw DataError("input file not found: " + path);
  const std::string text = read_file(path);
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    f(line, line_no);
  }
}

std::string default_id(const std::string& path, std::size_t line_no) {
  return std::filesystem::path(path).stem().string() + "-" + std::to_string(line_no);
}

}  // namespace

// ---------------------------------------------------------------------------
// prepare

PrepareResult cmd_prepare(const std::vector<std::string>& span_qa_paths,
                          const std::vector<std::string>& multidoc_paths, const std::string& out_path,
                          std::uint64_t seed, std::ostream* log, const std::string& state_path) {
  if (span_qa_paths.empty() && multidoc_paths.empty()) throw UsageError("prepare needs at least one input file");
  PrepareResult r;
  std::vector<Example> all;
  auto fail = [&](const std::string& path, std::size_t line_no, const char* what) {
    ++r.failed;
    if (log) *log << "skip " << path << ":" << line_no << ": " << what << "\n";
  };

  for (const auto& path : span_qa_paths) {
    for_each_line(path, [&](std::string_view line, std::size_t line_no) {
      ++r.records;
      try {
        SpanQARecord rec = span_qa_from_json_line(line);
        if (rec.id.empty()) rec.id = default_id(path, line_no);
        Example ex = restructure_span_qa(rec, segment_sentences);
        validate(ex);
        all.push_back(std::move(ex));
      } catch (const DataError& e) {
        fail(path, line_no, e.what());
      }
    });
  }
  for (const auto& path : multidoc_paths) {
    for_each_line(path, [&](std::string_view line, std::size_t line_no) {
      ++r.records;
      try {
        MultiDocQARecord rec = multidoc_qa_from_json_line(line);
        if (rec.id.empty()) rec.id = default_id(path, line_no);
        MultiDocRestructured out = restructure_multidoc_qa(rec);
        for (const auto& ex : out.examples) validate(ex);
        r.skipped_documents += out.skipped_documents;
        for (auto& ex : out.examples) all.push_back(std::move(ex));
      } catch (const DataError& e) {
        fail(path, line_no, e.what());
      }
    });
  }

  if (r.records == 0) throw DataError("prepare: no records in the input files");
  if (r.failed * 10 > r.records)
    throw DataError("prepare: " + std::to_string(r.failed) + " of " + std::to_string(r.records) +
                    " records failed (more than 10%)");

  std::set<std::string> seen;
  for (const auto& ex : all)
    if (!seen.insert(ex.id).second) throw DataError("prepare: duplicate example id '" + ex.id + "'");

  Rng rng(mix_seed(seed, 0x70726570ULL));
  rng.shuffle(all);
  save_examples(all, out_path);
  r.examples = all.size();
  record_stage(state_path, "prepared");
  return r;
}

// ---------------------------------------------------------------------------
// train

namespace {

std::vector<Example> load_split(const std::string& path, const char* name) {
  if (path.empty()) throw UsageError(std::string("no ") + name + " split configured");
  if (!file_exists(path)) throw DataError(std::string(name) + " split not found: " + path);
  return load_examples(path);
}

Vocabulary obtain_vocab(const RunConfig& cfg, const std::vector<Example>& corpus) {
  if (!cfg.vocab_path.empty() && file_exists(cfg.vocab_path)) {
    Vocabulary v = Vocabulary::load(cfg.vocab_path);
    if (v.max_markers() != cfg.max_markers)
      throw UsageError("vocabulary " + cfg.vocab_path + " has " + std::to_string(v.max_markers()) +
                       " markers, config asks for " + std::to_string(cfg.max_markers));
    return v;
  }
  Vocabulary v = Vocabulary::build(corpus, cfg.vocab_size, cfg.max_markers);
  if (!cfg.vocab_path.empty()) v.save(cfg.vocab_path);
  return v;
}

Vocabulary require_vocab(const RunConfig& cfg) {
  if (cfg.vocab_path.empty()) throw UsageError("no vocab path configured");
  if (!file_exists(cfg.vocab_path)) throw DataError("vocabulary not found: " + cfg.vocab_path);
  return Vocabulary::load(cfg.vocab_path);
}

std::string log_to_jsonl(const std::vector<LogEntry>& log) {
  std::string out;
  for (const auto& e : log) {
    ordered_json o;
    o["step"] = e.step;
    o["loss"] = e.loss;
    o["val_em"] = e.val_em;
    o["val_tf1"] = e.val_tf1;
    out += o.dump();
    out += '\n';
  }
  return out;
}

}  // namespace

std::vector<Example> training_examples(const RunConfig& cfg) {
  std::vector<Example> train_set = load_split(cfg.train_path, "train");
  if (cfg.fewshot) train_set = fewshot_sample(train_set, *cfg.fewshot, cfg.seed);
  return train_set;
}

TrainOutcome cmd_train(const RunConfig& cfg, const ProgressFn& progress) {
  validate(cfg);
  if (cfg.checkpoint_path.empty()) throw UsageError("no checkpoint path configured");
  std::vector<Example> full_train = load_split(cfg.train_path, "train");
  const std::vector<Example> val_set = load_split(cfg.val_path, "val");
  const Vocabulary vocab = obtain_vocab(cfg, full_train);

  ModelConfig mc = cfg.model;
  mc.vocab_size = vocab.size();
  mc.validate();

  std::optional<Parameters> initial;
  if (!cfg.init_from.empty()) {
    if (!file_exists(cfg.init_from)) throw DataError("init checkpoint not found: " + cfg.init_from);
    Checkpoint ck = load_checkpoint(cfg.init_from);
    if (ck.vocab_hash != vocab.hash())
      throw DataError("init checkpoint " + cfg.init_from + " was trained with a different vocabulary");
    try {
      require_same_shapes(mc, ck.params.config());
    } catch (const std::exception& e) {
      throw DataError("init checkpoint " + cfg.init_from + ": " + e.what());
    }
    initial.emplace(std::move(ck.params));
  } else {
    initial.emplace(init_params(mc));
  }

  std::vector<Example> train_set =
      cfg.fewshot ? fewshot_sample(full_train, *cfg.fewshot, cfg.seed) : std::move(full_train);

  InferenceSetup setup{&vocab, cfg.contexts};
  TrainResult tr = [&] {
    try {
      return train(train_set, val_set, setup, *initial, cfg.schedule, progress);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string("training aborted: ") + e.what(), e.step());
    }
  }();

  Checkpoint ck{tr.best, vocab.hash(), tr.best_step, cfg.stage, cfg.init_from};
  save_checkpoint(cfg.checkpoint_path, ck);
  if (!cfg.log_path.empty()) write_file(cfg.log_path, log_to_jsonl(tr.log));

  LineageEntry entry{cfg.stage, cfg.checkpoint_path, cfg.init_from};
  record_stage(cfg.state_path, cfg.stage == "intermediate" ? "intermediate_trained" : "target_trained", &entry);

  return {train_set.size(), tr.best_step, tr.best_val_tf1, tr.log};
}

// ---------------------------------------------------------------------------
// evaluate

std::string split_path(const RunConfig& cfg, const std::string& split) {
  if (split == "train") return cfg.train_path;
  if (split == "val") return cfg.val_path;
  if (split == "test") return cfg.test_path;
  throw UsageError("unknown split '" + split + "' (expected train, val or test)");
}

std::string to_json_line(const ChunkMeta& m) {
  ordered_json o;
  o["id"] = m.id;
  o["covered_sentences"] = std::vector<int>(m.covered_sentences.begin(), m.covered_sentences.end());
  o["n_chunks"] = m.n_chunks;
  o["truncated"] = m.truncated;
  return o.dump();
}

void save_chunk_meta(const std::vector<ChunkMeta>& meta, const std::string& path) {
  std::string out;
  for (const auto& m : meta) {
    out += to_json_line(m);
    out += '\n';
  }
  write_file(path, out);
}

std::vector<ChunkMeta> load_chunk_meta(const std::string& path) {
  std::vector<ChunkMeta> out;
  for_each_line(path, [&](std::string_view line, std::size_t line_no) {
    try {
      const json o = json::parse(line);
      ChunkMeta m;
      m.id = o.at("id").get<std::string>();
      for (int i : o.at("covered_sentences").get<std::vector<int>>()) m.covered_sentences.insert(i);
      m.n_chunks = o.at("n_chunks").get<std::size_t>();
      m.truncated = o.at("truncated").get<bool>();
      out.push_back(std::move(m));
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed chunk metadata: " + e.what());
    }
  });
  return out;
}

EvalOutcome cmd_evaluate(const RunConfig& cfg, const std::string& split, bool gold_replay) {
  validate(cfg);
  const std::string path = split_path(cfg, split);
  EvalOutcome out;

  if (gold_replay) {
    const std::vector<Example> examples = load_split(path, split.c_str());
    out.predictions = gold_predictions(examples);
    for (const auto& ex : examples) {
      IndexSet all;
      for (int i = 0; i < static_cast<int>(ex.sentences.size()); ++i) all.insert(i);
      out.chunk_meta.push_back({ex.id, all, 0, false});
    }
    out.report = evaluate(examples, out.predictions);
  } else {
    // Everything that can reject the checkpoint happens before decoding.
    if (cfg.checkpoint_path.empty()) throw UsageError("no checkpoint path configured");
    if (!file_exists(cfg.checkpoint_path)) throw DataError("checkpoint not found: " + cfg.checkpoint_path);
    const Vocabulary vocab = require_vocab(cfg);
    Checkpoint ck = load_checkpoint(cfg.checkpoint_path);
    ModelConfig expected = cfg.model;
    expected.vocab_size = vocab.size();
    try {
      require_same_shapes(expected, ck.params.config());
    } catch (const std::exception& e) {
      throw DataError("checkpoint " + cfg.checkpoint_path + " does not match the config: " + e.what());
    }
    if (ck.vocab_hash != vocab.hash())
      throw DataError("checkpoint " + cfg.checkpoint_path + " was trained with a different vocabulary");

    std::vector<Example> examples = load_split(path, split.c_str());
    std::sort(examples.begin(), examples.end(), [](const Example& a, const Example& b) { return a.id < b.id; });
    InferenceSetup setup{&vocab, cfg.contexts};
    for (const auto& p : predict_all(ck.params, setup, examples)) {
      out.predictions.push_back(p.record);
      out.chunk_meta.push_back(p.chunks);
    }
    out.report = evaluate(examples, out.predictions);
  }

  if (!cfg.report_path.empty()) write_file(cfg.report_path, out.report.to_json() + "\n");
  if (!cfg.predictions_path.empty()) save_predictions(out.predictions, cfg.predictions_path);
  if (!cfg.chunk_meta_path.empty()) save_chunk_meta(out.chunk_meta, cfg.chunk_meta_path);
  record_stage(cfg.state_path, "evaluated");
  return out;
}

// ---------------------------------------------------------------------------
// analyze

std::string AnalysisReport::to_json() const {
  ordered_json o;
  o["population"] = table.population;
  auto rows = [](const std::vector<FrequencyRow>& rs) {
    ordered_json a = ordered_json::array();
    for (const auto& r : rs) a.push_back({{"category", r.name}, {"count", r.count}, {"percent", r.percent}});
    return a;
  };
  o["table"] = rows(table.rows);
  o["adequacy"] = rows(table.adequacy_rows);
  o["examples"] = ordered_json::array();
  for (const auto& e : examples) {
    o["examples"].push_back({{"id", e.id},
                             {"category", to_string(e.category.kind)},
                             {"adequacy", to_string(e.category.adequacy)},
                             {"gold", std::vector<int>(e.gold.begin(), e.gold.end())},
                             {"pred", std::vector<int>(e.pred.begin(), e.pred.end())}});
  }
  return o.dump(2);
}

AnalysisReport cmd_analyze(const std::vector<Example>& examples, const std::vector<PredictionRecord>& predictions,
                           const std::vector<ChunkMeta>& chunk_meta, const AnalyzeOptions& opts) {
  std::map<std::string, const PredictionRecord*> by_pred;
  for (const auto& p : predictions) by_pred[p.id] = &p;
  std::map<std::string, const ChunkMeta*> by_meta;
  for (const auto& m : chunk_meta) by_meta[m.id] = &m;

  std::vector<const Example*> sorted;
  for (const auto& ex : examples) sorted.push_back(&ex);
  std::sort(sorted.begin(), sorted.end(), [](const Example* a, const Example* b) { return a->id < b->id; });

  std::vector<std::string> missing;
  for (const Example* ex : sorted) {
    if (!by_pred.count(ex->id)) missing.push_back(ex->id + " (prediction)");
    if (!by_meta.count(ex->id)) missing.push_back(ex->id + " (chunk metadata)");
  }
  if (!missing.empty()) {
    std::string msg = "ids missing from the analysis inputs: ";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) msg += ", ... (" + std::to_string(missing.size()) + " total)";
    throw DataError(msg);
  }

  std::map<std::string, Adequacy> adequacy;
  if (!opts.adequacy_path.empty()) adequacy = load_adequacy(opts.adequacy_path);

  AnalysisReport report;
  for (const Example* ex : sorted) {
    const PredictionRecord& p = *by_pred.at(ex->id);
    IndexSet pred;
    for (int m : p.marker_ids)
      if (m >= 1 && static_cast<std::size_t>(m) <= ex->sentences.size()) pred.insert(m - 1);
    const bool not_in_input = !p.out_of_range.empty();
    if (!not_in_input && set_f1(pred, ex->rationale_indices) >= 1.0) continue;
    AnalyzedExample a;
    a.id = ex->id;
    a.gold = ex->rationale_indices;
    a.pred = pred;
    a.category.kind = classify(a.gold, pred, not_in_input, by_meta.at(ex->id)->covered_sentences);
    if (auto it = adequacy.find(ex->id); it != adequacy.end()) a.category.adequacy = it->second;
    report.examples.push_back(std::move(a));
  }

  if (opts.sample > 0 && opts.sample < report.examples.size()) {
    std::vector<std::size_t> idx(report.examples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(mix_seed(opts.seed, 0x616e616cULL));
    rng.shuffle(idx);
    idx.resize(opts.sample);
    std::sort(idx.begin(), idx.end());
    std::vector<AnalyzedExample> kept;
    for (std::size_t i : idx) kept.push_back(report.examples[i]);
    report.examples = std::move(kept);
  }

  std::vector<ErrorCategory> cats;
  for (const auto& a : report.examples) cats.push_back(a.category);
  report.table = summarize(cats);
  return report;
}

// ---------------------------------------------------------------------------
// synth

void cmd_synth(std::uint64_t seed, const SynthSizes& sizes, const std::string& out_dir) {
  if (sizes.train == 0 || sizes.val == 0 || sizes.test == 0) throw UsageError("synth sizes must be positive");
  const std::pair<const char*, std::size_t> splits[] = {{"train", sizes.train}, {"val", sizes.val}, {"test", sizes.test}};
  for (std::size_t i = 0; i < 3; ++i) {
    SynthOptions o = default_synth_options(mix_seed(seed, 0x73796e74ULL, i), splits[i].second);
    o.id_prefix = std::string("synth-") + splits[i].first;
    save_examples(synth_dataset(o), (std::filesystem::path(out_dir) / (std::string(splits[i].first) + ".jsonl")).string());
  }
}

}  // namespace fidex
