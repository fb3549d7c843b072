#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "jmee/evaluation.hpp"
#include "jmee/heads.hpp"

namespace jmee {

struct LossConfig {
  double alpha = 5.0;  // weight of non-O trigger tokens
  double beta = 2.0;   // weight of the argument term

  void validate() const;
};

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t max_len = 50;
  double dropout = 0.5;
  double l2 = 1e-8;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  std::size_t patience = 5;  // epochs without dev improvement; 0 disables
  std::size_t threads = 1;
  /// Add gold triggers the model missed to the argument candidates.
  bool inject_gold_candidates = true;
  LossConfig loss;

  void validate() const;
};

/// Gold role per (candidate, entity), candidate-major. A candidate earns the
/// roles of a gold event only when span and subtype both match; every other
/// pair is OTHER.
std::vector<std::size_t> assign_argument_gold(std::span<const TriggerSpan> candidates,
                                              std::span<const EventMention> events,
                                              std::size_t num_entities);

/// -( sum_i I(tag_i) log p(tag_i) + beta sum_pairs log p(role) ) for one
/// sentence, with I = alpha for non-O gold tags and 1 otherwise. An invalid
/// `role_logits` means no candidate pairs. The l2 term is not included.
ad::Var joint_loss(ad::Var trigger_logits, std::span<const std::size_t> gold_tags,
                   ad::Var role_logits, std::span<const std::size_t> gold_roles,
                   const LossConfig& config);

/// Candidates decoded from `trigger_logits`, plus (optionally) gold triggers
/// absent from them, in span order.
std::vector<TriggerSpan> training_candidates(const Tensor& trigger_logits, const Sentence& sentence,
                                             bool inject_gold);

struct SentenceLoss {
  ad::Var loss;
  ForwardPass pass;
  std::vector<TriggerSpan> candidates;
};

/// Records the loss graph for one (already truncated) sentence on `bind`'s
/// tape. `fixed_candidates` overrides candidate extraction, which keeps the
/// loss smooth for finite-difference checks.
SentenceLoss sentence_loss(ParamBinder& bind, const Model& model, const Sentence& sentence,
                           const InputFeatures& input, const LossConfig& config,
                           const DropoutContext& dropout = {},
                           const std::vector<TriggerSpan>* fixed_candidates = nullptr,
                           bool inject_gold = true);

/// l2 * ||theta||^2 and its gradient.
double l2_penalty(const ParamStore& params, double l2);
void add_l2_gradient(GradientBuffer& grads, const ParamStore& params, double l2);

class AdaDelta {
 public:
  explicit AdaDelta(const ParamStore& params, double rho = 0.95, double eps = 1e-6);

  /// Throws NumericError naming the parameter when a gradient is not finite;
  /// parameters are untouched in that case.
  void step(ParamStore& params, const GradientBuffer& grads);

  const Tensor& mean_square_gradient(std::size_t slot) const { return eg2_[slot]; }
  const Tensor& mean_square_update(std::size_t slot) const { return edx2_[slot]; }

 private:
  double rho_, eps_;
  std::vector<Tensor> eg2_, edx2_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per-sentence objective, l2 included
  EvalReport dev;
};

struct TrainResult {
  Model model;  // best dev trigger-classification F1, ties to argument-role F1
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 = initialization
  bool stopped_early = false;
  EvalReport final_dev;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t epoch, std::size_t batch, const std::string& detail);
  std::size_t epoch, batch;
};

/// Deterministic for a fixed (config, seed, thread count). When `metric_log`
/// is set, one JSON record per epoch is written, then a final_dev record.
TrainResult train(Model initial, const Corpus& train_set, const Corpus& dev_set,
                  const TrainConfig& config, std::ostream* metric_log = nullptr,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Predicted events for every sentence, in order.
PredictionSet predict_corpus(const Corpus& corpus, const Model& model, std::size_t threads = 1);

/// Runs `fn(begin, end, chunk)` over `threads` contiguous chunks of [0, n).
void parallel_chunks(std::size_t n, std::size_t threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

}  // namespace jmee
