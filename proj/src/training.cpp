#include "jmee/training.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>
#include <utility>

namespace jmee {

using namespace ad;

void LossConfig::validate() const {
  if (!(alpha >= 1.0)) throw std::invalid_argument("alpha must be >= 1");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (max_len == 0) throw std::invalid_argument("max_len must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (!(l2 >= 0.0)) throw std::invalid_argument("l2 must be nonnegative");
  if (threads == 0) throw std::invalid_argument("threads must be positive");
  loss.validate();
}

std::vector<std::size_t> assign_argument_gold(std::span<const TriggerSpan> candidates,
                                              std::span<const EventMention> events,
                                              std::size_t num_entities) {
  std::vector<std::size_t> gold(candidates.size() * num_entities, labels::kOtherRole);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto& cand = candidates[c];
    for (const auto& ev : events) {
      if (ev.trigger_start != cand.start || ev.trigger_end != cand.end || ev.subtype != cand.subtype) continue;
      for (const auto& a : ev.arguments)
        if (a.entity < num_entities) gold[c * num_entities + a.entity] = a.role;
      break;
    }
  }
  return gold;
}

Var joint_loss(Var trigger_logits, std::span<const std::size_t> gold_tags, Var role_logits,
               std::span<const std::size_t> gold_roles, const LossConfig& config) {
  const std::size_t n = trigger_logits.value().rows();
  if (gold_tags.size() != n)
    throw DimensionError("joint_loss: " + std::to_string(gold_tags.size()) + " gold tags for " +
                         std::to_string(n) + " tokens");
  Tape& tape = trigger_logits.tape();
  Tensor weights({n, 1}, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    if (gold_tags[i] != labels::kOutsideTag) weights[i] = config.alpha;
  Var picked = pick(log_softmax(trigger_logits, 1), gold_tags);
  Var loss = affine(sum_all(mul(picked, tape.constant(std::move(weights)))), -1.0, 0.0);

  if (role_logits.valid()) {
    if (gold_roles.size() != role_logits.value().rows())
      throw DimensionError("joint_loss: " + std::to_string(gold_roles.size()) + " gold roles for " +
                           std::to_string(role_logits.value().rows()) + " pairs");
    Var roles = sum_all(pick(log_softmax(role_logits, 1), gold_roles));
    loss = add(loss, affine(roles, -config.beta, 0.0));
  } else if (!gold_roles.empty()) {
    throw DimensionError("joint_loss: gold roles given without role logits");
  }
  return loss;
}

std::vector<TriggerSpan> training_candidates(const Tensor& trigger_logits, const Sentence& sentence,
                                             bool inject_gold) {
  std::vector<TriggerSpan> out = extract_candidates(trigger_logits);
  if (inject_gold) {
    for (const auto& g : gold_trigger_spans(sentence))
      if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(g);
    std::sort(out.begin(), out.end());
  }
  return out;
}

SentenceLoss sentence_loss(ParamBinder& bind, const Model& model, const Sentence& sentence,
                           const InputFeatures& input, const LossConfig& config,
                           const DropoutContext& dropout,
                           const std::vector<TriggerSpan>* fixed_candidates, bool inject_gold) {
  SentenceLoss out;
  out.pass = forward(bind, model, input, dropout);
  out.candidates = fixed_candidates
                       ? *fixed_candidates
                       : training_candidates(out.pass.trigger.logits.value(), sentence, inject_gold);
  const auto tags = encode_trigger_bio(sentence);
  Var roles = candidate_role_logits(bind, model, out.pass, out.candidates, sentence.entities);
  const auto gold_roles = assign_argument_gold(out.candidates, sentence.events, sentence.entities.size());
  out.loss = joint_loss(out.pass.trigger.logits, tags, roles, gold_roles, config);
  return out;
}

double l2_penalty(const ParamStore& params, double l2) { return l2 == 0.0 ? 0.0 : l2 * params.squared_norm(); }

void add_l2_gradient(GradientBuffer& grads, const ParamStore& params, double l2) {
  if (l2 == 0.0) return;
  for (std::size_t s = 0; s < params.size(); ++s) {
    auto g = grads[s].data();
    const auto v = params[s].value.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * l2 * v[i];
  }
}

AdaDelta::AdaDelta(const ParamStore& params, double rho, double eps) : rho_(rho), eps_(eps) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("AdaDelta rho must lie in (0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("AdaDelta eps must be positive");
  for (const auto& p : params) {
    eg2_.emplace_back(p.value.shape(), 0.0);
    edx2_.emplace_back(p.value.shape(), 0.0);
  }
}

void AdaDelta::step(ParamStore& params, const GradientBuffer& grads) {
  if (grads.size() != params.size() || eg2_.size() != params.size())
    throw DimensionError("AdaDelta::step: parameter/gradient count mismatch");
  for (std::size_t s = 0; s < params.size(); ++s) {
    if (grads[s].shape() != params[s].value.shape())
      throw DimensionError("AdaDelta::step: gradient shape for " + params[s].name);
    if (!grads[s].all_finite()) {
      const auto g = grads[s].data();
      const auto bad = std::find_if(g.begin(), g.end(), [](double v) { return !std::isfinite(v); });
      throw NumericError("AdaDelta: non-finite gradient for " + params[s].name + " at element " +
                         std::to_string(bad - g.begin()));
    }
  }
  for (std::size_t s = 0; s < params.size(); ++s) {
    auto x = params[s].value.data();
    const auto g = grads[s].data();
    auto eg2 = eg2_[s].data();
    auto edx2 = edx2_[s].data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      eg2[i] = rho_ * eg2[i] + (1.0 - rho_) * g[i] * g[i];
      const double dx = -std::sqrt(edx2[i] + eps_) / std::sqrt(eg2[i] + eps_) * g[i];
      edx2[i] = rho_ * edx2[i] + (1.0 - rho_) * dx * dx;
      x[i] += dx;
    }
  }
}

TrainingDiverged::TrainingDiverged(std::size_t e, std::size_t b, const std::string& detail)
    : std::runtime_error("training diverged at epoch " + std::to_string(e) + ", batch " + std::to_string(b) +
                         ": " + detail),
      epoch(e),
      batch(b) {}

void parallel_chunks(std::size_t n, std::size_t threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    fn(0, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t c = 0; c < threads; ++c) {
    const std::size_t begin = n * c / threads, end = n * (c + 1) / threads;
    pool.emplace_back([&, begin, end, c] {
      try {
        fn(begin, end, c);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

PredictionSet predict_corpus(const Corpus& corpus, const Model& model, std::size_t threads) {
  PredictionSet out(corpus.size());
  parallel_chunks(corpus.size(), threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) out[i] = predict_sentence(corpus[i], model).events;
  });
  return out;
}

namespace {

struct Prepared {
  Sentence sentence;
  InputFeatures input;
};

std::mt19937_64 sentence_rng(std::uint64_t seed, std::size_t epoch, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32)};
  return std::mt19937_64(seq);
}

nlohmann::ordered_json report_object(const EvalReport& r) { return nlohmann::ordered_json::parse(report_json(r)); }

}  // namespace

TrainResult train(Model initial, const Corpus& train_set, const Corpus& dev_set, const TrainConfig& config,
                  std::ostream* metric_log, const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("training corpus is empty");
  if (dev_set.empty()) throw std::invalid_argument("dev corpus is empty");
  if (config.max_len > initial.config().max_len)
    throw std::invalid_argument("max_len " + std::to_string(config.max_len) + " exceeds the model's " +
                                std::to_string(initial.config().max_len));

  std::vector<Prepared> data;
  data.reserve(train_set.size());
  for (const auto& s : train_set) {
    Sentence t = truncate(s, config.max_len);
    InputFeatures f = featurize(t, initial.catalog());
    data.push_back({std::move(t), std::move(f)});
  }

  Model model = std::move(initial);
  TrainResult result{model, {}, 0, false, {}};
  // Dev trigger-classification F1, ties broken by argument-role F1.
  auto selection_key = [](const EvalReport& r) {
    return std::pair(r.trigger_classification.f1(), r.argument_role.f1());
  };
  auto best_key = selection_key(score(dev_set, predict_corpus(dev_set, model, config.threads)));
  std::size_t since_best = 0;

  AdaDelta optimizer(model.params());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(config.seed);
  const std::size_t workers = std::max<std::size_t>(1, config.threads);
  std::vector<GradientBuffer> partial(workers, GradientBuffer(model.params()));
  std::vector<double> partial_loss(workers);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    const std::size_t batches = (order.size() + config.batch_size - 1) / config.batch_size;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t count = std::min(config.batch_size, order.size() - begin);
      for (auto& g : partial) g.zero();
      std::fill(partial_loss.begin(), partial_loss.end(), 0.0);
      double batch_loss = 0.0;
      try {
        parallel_chunks(count, workers, [&](std::size_t lo, std::size_t hi, std::size_t chunk) {
          for (std::size_t k = lo; k < hi; ++k) {
            const std::size_t idx = order[begin + k];
            std::mt19937_64 rng = sentence_rng(config.seed, epoch, idx);
            Tape tape;
            ParamBinder bind(tape, model.params());
            const DropoutContext dropout{config.dropout, &rng};
            SentenceLoss sl = sentence_loss(bind, model, data[idx].sentence, data[idx].input, config.loss,
                                            dropout, nullptr, config.inject_gold_candidates);
            tape.backward(sl.loss);
            partial[chunk].accumulate(tape);
            partial_loss[chunk] += sl.loss.value().item();
          }
        });
        for (std::size_t c = 1; c < workers; ++c) partial[0].add(partial[c]);
        for (double l : partial_loss) batch_loss += l;
        batch_loss += l2_penalty(model.params(), config.l2);
        if (!std::isfinite(batch_loss)) throw NumericError("non-finite loss");
        add_l2_gradient(partial[0], model.params(), config.l2);
        optimizer.step(model.params(), partial[0]);
      } catch (const NumericError& e) {
        throw TrainingDiverged(epoch, b, e.what());
      }
      epoch_loss += batch_loss;
    }

    EpochRecord rec{epoch, epoch_loss / static_cast<double>(data.size()),
                    score(dev_set, predict_corpus(dev_set, model, config.threads))};
    result.history.push_back(rec);
    if (metric_log) {
      nlohmann::ordered_json j{{"epoch", rec.epoch}, {"train_loss", rec.train_loss}, {"dev", report_object(rec.dev)}};
      *metric_log << j.dump() << '\n';
    }
    if (on_epoch) on_epoch(rec);

    const auto key = selection_key(rec.dev);
    if (key > best_key) {
      best_key = key;
      result.model = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      result.stopped_early = epoch < config.epochs;
      break;
    }
  }

  result.final_dev = score(dev_set, predict_corpus(dev_set, result.model, config.threads));
  if (metric_log) {
    nlohmann::ordered_json j{{"final_dev", report_object(result.final_dev)}, {"best_epoch", result.best_epoch}};
    *metric_log << j.dump() << '\n';
    metric_log->flush();
  }
  return result;
}

}  // namespace jmee
