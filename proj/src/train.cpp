#include "fidex/train.hpp"

#include <cmath>

namespace fidex {

Adam::Adam(std::size_t n, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw std::invalid_argument("Adam: size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps_);
  }
}

double scheduled_lr(const Schedule& s, std::size_t t) {
  if (!s.lr_decay || s.total_steps == 0) return s.lr;
  return s.lr * (1.0 - static_cast<double>(t) / static_cast<double>(s.total_steps));
}

TrainingExample make_training_example(const Example& ex, const Vocabulary& vocab, std::size_t context_length,
                                      std::size_t max_chunks, std::size_t max_target_len) {
  TrainingExample t;
  t.chunks = chunk(ex, vocab, context_length, max_chunks);
  t.target = target_ids(ex.label, ex.rationale_indices, vocab, max_target_len);
  return t;
}

Prediction predict(const Parameters& params, const InferenceSetup& setup, const Example& ex) {
  const ChunkSet cs = chunk(ex, *setup.vocab, params.config().context_length, setup.max_chunks);
  const std::vector<int> ids = greedy_decode(params, cs, params.config().max_target_len);
  Prediction p;
  p.decoded_text = detokenize(ids, *setup.vocab);
  p.record = make_prediction_record(ex.id, parse_output(p.decoded_text), ex.sentences.size());
  p.chunks = {ex.id, cs.covered_sentences, cs.size(), cs.truncated};
  return p;
}

std::vector<Prediction> predict_all(const Parameters& params, const InferenceSetup& setup,
                                    const std::vector<Example>& examples) {
  std::vector<Prediction> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(predict(params, setup, ex));
  return out;
}

TrainResult train(const std::vector<Example>& train_set, const std::vector<Example>& val_set,
                  const InferenceSetup& setup, const Parameters& initial, const Schedule& schedule,
                  const ProgressFn& progress) {
  TrainResult result{initial, 0, -1.0, {}};
  if (schedule.total_steps == 0) return result;
  if (train_set.empty()) throw UsageError("training set is empty");
  if (val_set.empty()) throw UsageError("validation set is empty");
  if (schedule.batch_size == 0 || schedule.eval_every == 0) throw UsageError("batch_size and eval_every must be positive");
  if (!(schedule.lr > 0.0)) throw UsageError("learning rate must be positive");

  const auto& cfg = initial.config();
  std::vector<TrainingExample> data;
  data.reserve(train_set.size());
  for (const auto& ex : train_set)
    data.push_back(make_training_example(ex, *setup.vocab, cfg.context_length, setup.max_chunks, cfg.max_target_len));

  Parameters params = initial;
  Adam adam(params.size());
  std::vector<std::size_t> order(data.size());
  std::size_t cursor = order.size();
  std::size_t epoch = 0;
  double window_loss = 0.0;
  std::size_t window_steps = 0;
  std::vector<TrainingExample> batch;

  for (std::size_t step = 0; step < schedule.total_steps; ++step) {
    batch.clear();
    while (batch.size() < schedule.batch_size) {
      if (cursor == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(mix_seed(schedule.seed, 0x65706f6368ULL, epoch++));
        rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(data[order[cursor++]]);
    }

    const std::uint64_t dropout_seed = cfg.dropout_rate > 0.0 ? mix_seed(schedule.seed, step + 1, 0x64726f70ULL) : 0;
    GradientResult g = [&] {
      try {
        return grad(params, batch, dropout_seed);
      } catch (const NumericalError&) {
        throw NumericalError("non-finite loss at step " + std::to_string(step + 1), static_cast<long>(step + 1));
      }
    }();
    if (!std::isfinite(g.loss) || !g.grad.all_finite())
      throw NumericalError("non-finite loss at step " + std::to_string(step + 1), static_cast<long>(step + 1));
    adam.step(params.data(), g.grad.data(), scheduled_lr(schedule, step));
    window_loss += g.loss;
    ++window_steps;

    const std::size_t done = step + 1;
    if (done % schedule.eval_every == 0 || done == schedule.total_steps) {
      const auto preds = predict_all(params, setup, val_set);
      std::vector<PredictionRecord> records;
      records.reserve(preds.size());
      for (const auto& p : preds) records.push_back(p.record);
      const EvalReport report = evaluate(val_set, records);
      LogEntry entry{done, window_loss / static_cast<double>(window_steps), report.em, report.tf1};
      result.log.push_back(entry);
      window_loss = 0.0;
      window_steps = 0;
      if (report.tf1 > result.best_val_tf1) {
        result.best_val_tf1 = report.tf1;
        result.best_step = done;
        result.best = params;
      }
      if (progress) progress(entry);
    }
  }
  return result;
}

}  // namespace fidex
