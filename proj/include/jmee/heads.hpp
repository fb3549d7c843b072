#pragma once

#include <span>
#include <vector>

#include "jmee/encoder.hpp"

namespace jmee {

struct AttentionContext {
  ad::Var scores;   // n x 1, sums to 1
  ad::Var context;  // n x 2h, row i = [sum_{j != i} score_j D_j | D_i]
};

/// One score vector per sentence; the per-position exclusion is taken as the
/// full weighted sum minus score_i * D_i.
AttentionContext self_attention_context(ParamBinder& bind, const HeadParams& params, ad::Var reps);

struct TriggerOutput {
  ad::Var transformed;  // n x transform_hidden, the aggregated context C-bar
  ad::Var logits;       // n x 67
};

TriggerOutput trigger_classify(ParamBinder& bind, const HeadParams& params, ad::Var context);

/// Row-wise argmax (ties to the lowest tag, so O wins ties) followed by BIO
/// span decoding.
std::vector<TriggerSpan> extract_candidates(const Tensor& trigger_scores);

struct SpanPair {
  std::size_t trigger_start, trigger_end;
  std::size_t entity_start, entity_end;
};

/// Role logits (pairs x 37) for mean-pooled [trigger | entity] rows of
/// `transformed`.
ad::Var argument_classify(ParamBinder& bind, const HeadParams& params, ad::Var transformed,
                          std::span<const SpanPair> pairs);

/// Every tensor needed by the loss and by prediction for one sentence.
struct ForwardPass {
  EncodedSentence encoded;
  AttentionContext attention;
  TriggerOutput trigger;
};

ForwardPass forward(ParamBinder& bind, const Model& model, const InputFeatures& input,
                    const DropoutContext& dropout = {});

/// Role logits for every (candidate, entity) pair, candidate-major. Returns
/// an invalid Var when there are no pairs.
ad::Var candidate_role_logits(ParamBinder& bind, const Model& model, const ForwardPass& pass,
                              std::span<const TriggerSpan> candidates,
                              std::span<const EntityMention> entities);

struct SentencePrediction {
  std::vector<std::size_t> trigger_tags;
  Tensor trigger_probs;  // n x 67
  std::vector<TriggerSpan> candidates;
  /// role_probs[c * entities + e] is the 37-way distribution for candidate c
  /// and entity e.
  std::vector<std::vector<double>> role_probs;
  std::vector<double> attention;  // n
  Tensor context;                 // n x transform_hidden
  std::vector<EventMention> events;
};

/// Runs the model without dropout on `sentence` truncated to max_len.
/// Arguments whose arg-max role is OTHER are omitted from `events`; their
/// entity indices refer to `sentence.entities`.
SentencePrediction predict_sentence(const Sentence& sentence, const Model& model);

}  // namespace jmee
