#include "jmee/heads.hpp"

#include <algorithm>

namespace jmee {

using namespace ad;

AttentionContext self_attention_context(ParamBinder& bind, const HeadParams& p, Var reps) {
  const std::size_t n = reps.value().rows();
  if (n == 0) throw DimensionError("self_attention_context: empty sentence");
  Var hidden = relu(add_bias(matmul(reps, bind(p.w1)), bind(p.b1)));
  Var logits = add_bias(matmul(hidden, bind(p.w2)), bind(p.b2));
  Var scores = softmax(logits, 0);

  Var weighted = mul_column(reps, scores);
  Var total = reduce(ReduceOp::sum, weighted, 0);
  const std::vector<std::size_t> broadcast(n, 0);
  Var others = sub(gather_rows(total, broadcast), weighted);
  return {scores, concat({others, reps}, 1)};
}

TriggerOutput trigger_classify(ParamBinder& bind, const HeadParams& p, Var context) {
  Var transformed = relu(add_bias(matmul(context, bind(p.wc)), bind(p.bc)));
  Var logits = add_bias(matmul(transformed, bind(p.wt)), bind(p.bt));
  return {transformed, logits};
}

std::vector<TriggerSpan> extract_candidates(const Tensor& scores) {
  const std::size_t n = scores.rows(), k = scores.cols();
  std::vector<std::size_t> tags(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (scores.at(i, j) > scores.at(i, best)) best = j;
    tags[i] = best;
  }
  return decode_trigger_spans(tags);
}

Var argument_classify(ParamBinder& bind, const HeadParams& p, Var transformed,
                      std::span<const SpanPair> pairs) {
  if (pairs.empty()) throw DimensionError("argument_classify: no pairs");
  const std::size_t n = transformed.value().rows();
  auto pool = [&](std::size_t start, std::size_t end) {
    if (start >= end || end > n)
      throw DimensionError("argument_classify: span [" + std::to_string(start) + ", " +
                           std::to_string(end) + ") invalid for " + std::to_string(n) + " tokens");
    return reduce(ReduceOp::mean, slice(transformed, 0, start, end - start), 0);
  };
  std::vector<Var> rows;
  rows.reserve(pairs.size());
  for (const auto& pr : pairs)
    rows.push_back(concat({pool(pr.trigger_start, pr.trigger_end), pool(pr.entity_start, pr.entity_end)}, 1));
  Var stacked = rows.size() == 1 ? rows[0] : concat(rows, 0);
  return add_bias(matmul(stacked, bind(p.wa)), bind(p.ba));
}

ForwardPass forward(ParamBinder& bind, const Model& model, const InputFeatures& input,
                    const DropoutContext& dropout) {
  ForwardPass pass;
  pass.encoded = encode(bind, model, input, dropout);
  pass.attention = self_attention_context(bind, model.heads(), pass.encoded.reps);
  pass.trigger = trigger_classify(bind, model.heads(), pass.attention.context);
  return pass;
}

Var candidate_role_logits(ParamBinder& bind, const Model& model, const ForwardPass& pass,
                          std::span<const TriggerSpan> candidates,
                          std::span<const EntityMention> entities) {
  std::vector<SpanPair> pairs;
  for (const auto& c : candidates)
    for (const auto& e : entities) pairs.push_back({c.start, c.end, e.start, e.end});
  if (pairs.empty()) return {};
  return argument_classify(bind, model.heads(), pass.trigger.transformed, pairs);
}

SentencePrediction predict_sentence(const Sentence& original, const Model& model) {
  const std::size_t max_len = model.config().max_len;
  const Sentence sentence = truncate(original, max_len);
  // Entities surviving truncation, as indices into the caller's entity list.
  std::vector<std::size_t> kept_entity;
  for (std::size_t e = 0; e < original.entities.size(); ++e)
    if (original.size() <= max_len || original.entities[e].end <= max_len) kept_entity.push_back(e);
  const InputFeatures input = featurize(sentence, model.catalog());
  Tape tape;
  ParamBinder bind(tape, model.params());
  const ForwardPass pass = forward(bind, model, input);

  SentencePrediction out;
  Var probs = softmax(pass.trigger.logits, 1);
  out.trigger_probs = probs.value();
  out.candidates = extract_candidates(out.trigger_probs);
  const std::size_t n = sentence.size();
  out.trigger_tags.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < labels::kNumTriggerTags; ++j)
      if (out.trigger_probs.at(i, j) > out.trigger_probs.at(i, best)) best = j;
    out.trigger_tags[i] = best;
  }
  const auto& scores = pass.attention.scores.value();
  out.attention.assign(scores.data().begin(), scores.data().end());
  out.context = pass.trigger.transformed.value();

  for (const auto& c : out.candidates) out.events.push_back({c.start, c.end, c.subtype, {}});
  Var role_logits = candidate_role_logits(bind, model, pass, out.candidates, sentence.entities);
  if (role_logits.valid()) {
    const Tensor role_probs = softmax(role_logits, 1).value();
    const std::size_t m = sentence.entities.size();
    for (std::size_t r = 0; r < role_probs.rows(); ++r) {
      std::vector<double> dist(labels::kNumRoles);
      std::size_t best = 0;
      for (std::size_t k = 0; k < labels::kNumRoles; ++k) {
        dist[k] = role_probs.at(r, k);
        if (dist[k] > dist[best]) best = k;
      }
      if (best != labels::kOtherRole) out.events[r / m].arguments.push_back({kept_entity[r % m], best});
      out.role_probs.push_back(std::move(dist));
    }
  }
  return out;
}

}  // namespace jmee
