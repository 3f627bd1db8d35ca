#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fidex/checkpoint.hpp"
#include "fidex/corpus.hpp"
#include "fidex/decodeparse.hpp"
#include "fidex/erroranalysis.hpp"
#include "fidex/harness.hpp"
#include "fidex/metrics.hpp"
#include "fidex/model.hpp"
#include "fidex/textproc.hpp"
#include "fidex/train.hpp"

namespace py = pybind11;
using namespace fidex;

PYBIND11_MODULE(_fidex, m) {
  m.doc() = "Fusion-in-decoder extractive rationale pipeline";

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  // corpus
  py::class_<Example>(m, "Example")
      .def(py::init<>())
      .def(py::init([](std::string id, std::string task, std::string query, std::vector<std::string> sentences,
                       std::string label, IndexSet rationale) {
             return Example{std::move(id), std::move(task), std::move(query), std::move(sentences),
                            std::move(label), std::move(rationale)};
           }),
           py::arg("id"), py::arg("task"), py::arg("query"), py::arg("sentences"), py::arg("label"),
           py::arg("rationale_indices"))
      .def_readwrite("id", &Example::id)
      .def_readwrite("task", &Example::task)
      .def_readwrite("query", &Example::query)
      .def_readwrite("sentences", &Example::sentences)
      .def_readwrite("label", &Example::label)
      .def_readwrite("rationale_indices", &Example::rationale_indices)
      .def("to_json", [](const Example& e) { return to_json_line(e); })
      .def(py::self == py::self)
      .def("__repr__", [](const Example& e) { return "<Example " + e.id + ">"; });

  m.def("validate_example", py::overload_cast<const Example&>(&validate));
  m.def("load_examples", &load_examples, py::arg("path"));
  m.def("save_examples", &save_examples, py::arg("examples"), py::arg("path"));
  m.def("parse_examples", &parse_examples, py::arg("text"), py::arg("source") = "<memory>");
  m.def("format_examples", &format_examples);
  m.def(
      "synth_dataset",
      [](std::uint64_t seed, std::size_t n) { return synth_dataset(default_synth_options(seed, n)); },
      py::arg("seed"), py::arg("n"));
  m.def(
      "fewshot_sample",
      [](const std::vector<Example>& examples, const std::string& budget, std::uint64_t seed) {
        return fewshot_sample(examples, FewShotBudget::parse(budget), seed);
      },
      py::arg("examples"), py::arg("budget"), py::arg("seed"));

  // textproc
  py::class_<Vocabulary>(m, "Vocabulary")
      .def_static("build", &Vocabulary::build, py::arg("corpus"), py::arg("max_size") = Vocabulary::kDefaultMaxSize,
                  py::arg("max_markers") = Vocabulary::kDefaultMaxMarkers)
      .def_static("load", &Vocabulary::load)
      .def("save", &Vocabulary::save)
      .def("__len__", &Vocabulary::size)
      .def("id", &Vocabulary::id)
      .def("token", &Vocabulary::token)
      .def("hash", &Vocabulary::hash)
      .def_property_readonly("max_markers", &Vocabulary::max_markers);

  m.def("segment_sentences", &segment_sentences);
  m.def("serialize_input", &serialize_input, py::arg("example"),
        py::arg("max_markers") = Vocabulary::kDefaultMaxMarkers);
  m.def("serialize_target", &serialize_target, py::arg("label"), py::arg("rationale_indices"));
  m.def("tokenize", &tokenize);
  m.def("detokenize", &detokenize);

  py::class_<ChunkSet>(m, "ChunkSet")
      .def_readonly("context_length", &ChunkSet::context_length)
      .def_readonly("prefix_length", &ChunkSet::prefix_length)
      .def_readonly("chunks", &ChunkSet::chunks)
      .def_readonly("pad_mask", &ChunkSet::pad_mask)
      .def_readonly("sentences_in_chunk", &ChunkSet::sentences_in_chunk)
      .def_readonly("covered_sentences", &ChunkSet::covered_sentences)
      .def_readonly("truncated", &ChunkSet::truncated)
      .def("__len__", &ChunkSet::size);
  m.def("chunk", &chunk, py::arg("example"), py::arg("vocab"), py::arg("context_length"), py::arg("max_chunks"));

  // decodeparse
  py::class_<ParsedPrediction>(m, "ParsedPrediction")
      .def_readonly("label_text", &ParsedPrediction::label_text)
      .def_readonly("marker_ids", &ParsedPrediction::marker_ids)
      .def_readonly("malformed_segments", &ParsedPrediction::malformed_segments);
  py::class_<SentenceMapping>(m, "SentenceMapping")
      .def_readonly("rationale_indices", &SentenceMapping::rationale_indices)
      .def_readonly("out_of_range", &SentenceMapping::out_of_range)
      .def_readonly("not_in_input", &SentenceMapping::not_in_input);
  m.def("parse_output", &parse_output);
  m.def("map_to_sentences", &map_to_sentences, py::arg("parsed"), py::arg("n_sentences"));

  // metrics
  m.def("exact_match", &exact_match);
  m.def("set_f1", py::overload_cast<const IndexSet&, const IndexSet&>(&set_f1), py::arg("pred"), py::arg("gold"));
  m.def("sentence_token_spans", &sentence_token_spans);
  m.def("token_f1", &token_f1, py::arg("pred"), py::arg("gold"), py::arg("spans"));
  m.def("iou_f1", &iou_f1, py::arg("pred"), py::arg("gold"), py::arg("spans"),
        py::arg("threshold") = kDefaultIouThreshold);

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("em", &EvalReport::em)
      .def_readonly("rf1", &EvalReport::rf1)
      .def_readonly("tf1", &EvalReport::tf1)
      .def_readonly("iou_f1", &EvalReport::iou_f1)
      .def_readonly("n", &EvalReport::n)
      .def_readonly("missing_predictions", &EvalReport::missing_predictions)
      .def("to_json", &EvalReport::to_json);
  m.def(
      "evaluate_gold_replay", [](const std::vector<Example>& examples) {
        return evaluate(examples, gold_predictions(examples));
      },
      "Scores the gold annotations as predictions.");

  // erroranalysis
  m.def(
      "classify",
      [](const IndexSet& gold, const IndexSet& pred, bool not_in_input, const IndexSet& covered) {
        return std::string(to_string(classify(gold, pred, not_in_input, covered)));
      },
      py::arg("gold"), py::arg("pred"), py::arg("not_in_input"), py::arg("covered_sentences"));
  m.def(
      "summarize",
      [](const std::vector<std::string>& kinds) {
        std::vector<ErrorCategory> cats;
        for (const auto& k : kinds) {
          auto parsed = parse_error_kind(k);
          if (!parsed) throw UsageError("unknown error category '" + k + "'");
          cats.push_back({*parsed, Adequacy::kUnlabeled});
        }
        py::dict out;
        for (const auto& row : summarize(cats).rows) out[py::str(row.name)] = py::make_tuple(row.count, row.percent);
        return out;
      },
      "Category -> (count, percent) over the non-perfect entries.");

  // model
  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("d_model", &ModelConfig::d_model)
      .def_readwrite("n_heads", &ModelConfig::n_heads)
      .def_readwrite("n_enc_layers", &ModelConfig::n_enc_layers)
      .def_readwrite("n_dec_layers", &ModelConfig::n_dec_layers)
      .def_readwrite("d_ffn", &ModelConfig::d_ffn)
      .def_readwrite("vocab_size", &ModelConfig::vocab_size)
      .def_readwrite("context_length", &ModelConfig::context_length)
      .def_readwrite("max_target_len", &ModelConfig::max_target_len)
      .def_readwrite("dropout_rate", &ModelConfig::dropout_rate)
      .def_readwrite("seed", &ModelConfig::seed);
  py::class_<Parameters>(m, "Parameters")
      .def("__len__", &Parameters::size)
      .def_property_readonly("config", &Parameters::config)
      .def("values", [](const Parameters& p) { return std::vector<double>(p.data().begin(), p.data().end()); });
  m.def("init_params", &init_params);
  m.def("parameter_count", &parameter_count);
  m.def(
      "loss", [](const Parameters& p, const ChunkSet& cs, const std::vector<int>& target) { return loss(p, cs, target); },
      py::arg("params"), py::arg("chunks"), py::arg("target_ids"));
  m.def(
      "greedy_decode",
      [](const Parameters& p, const ChunkSet& cs, std::size_t max_len) { return greedy_decode(p, cs, max_len); },
      py::arg("params"), py::arg("chunks"), py::arg("max_len"));
  m.def("target_ids", &target_ids, py::arg("label"), py::arg("rationale_indices"), py::arg("vocab"),
        py::arg("max_len"));
  m.def(
      "load_checkpoint_params", [](const std::string& path) { return load_checkpoint(path).params; },
      py::arg("path"));

  // harness
  m.def(
      "load_run_config", [](const std::string& path) { return run_config_to_json(load_run_config(path)); },
      "Resolved config, as JSON text.");
  m.def("cmd_synth",
        [](std::uint64_t seed, const std::string& out_dir, std::size_t n_train, std::size_t n_val,
           std::size_t n_test) { cmd_synth(seed, {n_train, n_val, n_test}, out_dir); },
        py::arg("seed"), py::arg("out_dir"), py::arg("n_train") = 1000, py::arg("n_val") = 200,
        py::arg("n_test") = 200);
  m.def(
      "cmd_train",
      [](const std::string& config_path, std::optional<std::string> fewshot, std::optional<std::uint64_t> seed) {
        RunConfig cfg = load_run_config(config_path);
        if (fewshot) cfg.fewshot = FewShotBudget::parse(*fewshot);
        if (seed) cfg.set_seed(*seed);
        py::gil_scoped_release release;
        const TrainOutcome out = cmd_train(cfg);
        return py::make_tuple(out.train_examples, out.best_step, out.best_val_tf1);
      },
      py::arg("config"), py::arg("fewshot") = py::none(), py::arg("seed") = py::none(),
      "Returns (train_examples, best_step, best_val_tf1).");
  m.def(
      "cmd_evaluate",
      [](const std::string& config_path, const std::string& split, bool gold_replay) {
        const RunConfig cfg = load_run_config(config_path);
        py::gil_scoped_release release;
        return cmd_evaluate(cfg, split, gold_replay).report;
      },
      py::arg("config"), py::arg("split") = "test", py::arg("gold_replay") = false);
}
