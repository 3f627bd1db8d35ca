#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fidex/decodeparse.hpp"
#include "fidex/metrics.hpp"
#include "fidex/model.hpp"

namespace fidex {

struct Schedule {
  double lr = 1e-4;
  std::size_t total_steps = 20000;
  std::size_t batch_size = 8;
  std::size_t eval_every = 500;
  /// Linear decay from lr to 0 over total_steps.
  bool lr_decay = true;
  std::uint64_t seed = 0;
};

/// Adam with bias correction.
class Adam {
 public:
  explicit Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad, double lr);
  std::size_t steps_taken() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

/// Learning rate used at 0-based step t.
double scheduled_lr(const Schedule& s, std::size_t t);

struct LogEntry {
  std::size_t step = 0;
  /// Mean training loss since the previous log entry.
  double loss = 0.0;
  double val_em = 0.0;
  double val_tf1 = 0.0;
};

struct TrainResult {
  Parameters best;
  std::size_t best_step = 0;
  double best_val_tf1 = -1.0;
  std::vector<LogEntry> log;
};

/// Everything inference needs besides the weights.
struct InferenceSetup {
  const Vocabulary* vocab = nullptr;
  std::size_t max_chunks = 1;
};

struct ChunkMeta {
  std::string id;
  IndexSet covered_sentences;
  std::size_t n_chunks = 0;
  bool truncated = false;
};

struct Prediction {
  PredictionRecord record;
  ChunkMeta chunks;
  std::string decoded_text;
};

/// chunk -> encode -> greedy decode -> parse -> map markers.
Prediction predict(const Parameters& params, const InferenceSetup& setup, const Example& ex);
std::vector<Prediction> predict_all(const Parameters& params, const InferenceSetup& setup,
                                    const std::vector<Example>& examples);

TrainingExample make_training_example(const Example& ex, const Vocabulary& vocab, std::size_t context_length,
                                      std::size_t max_chunks, std::size_t max_target_len);

using ProgressFn = std::function<void(const LogEntry&)>;

/// Adam training with seeded per-epoch shuffling. Every eval_every steps
/// (and after the last step) the validation set is decoded and scored; the
/// parameters with the best validation Token F1 are kept, ties going to the
/// earlier step. total_steps == 0 returns the initial parameters.
/// Throws NumericalError on a non-finite loss.
TrainResult train(const std::vector<Example>& train_set, const std::vector<Example>& val_set,
                  const InferenceSetup& setup, const Parameters& initial, const Schedule& schedule,
                  const ProgressFn& progress = {});

}  // namespace fidex
