#include "jmee/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "jmee/synthetic.hpp"

namespace jmee::verify {

using namespace ad;

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic) + std::abs(numeric));
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t below(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform(rng, 0.0, static_cast<double>(n)));
}

Tensor random_tensor(std::mt19937_64& rng, Shape shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = uniform(rng, -scale, scale);
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double seeded_output(const OpBuilder& build, const std::vector<Tensor>& inputs, const Tensor& seed) {
  Tape tape;
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.variable(t));
  return dot(build(leaves).value(), seed);
}

}  // namespace

GradCheck check_vjp(const OpBuilder& build, const std::vector<Tensor>& inputs, double step,
                    std::mt19937_64& rng) {
  Tape tape;
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.variable(t));
  Var out = build(leaves);
  const Tensor seed = random_tensor(rng, out.value().shape());
  tape.backward(out, seed);

  GradCheck result;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = tape.grad(leaves[k]);
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double x = inputs[k][i];
      probe[k][i] = x + step;
      const double plus = seeded_output(build, probe, seed);
      probe[k][i] = x - step;
      const double minus = seeded_output(build, probe, seed);
      probe[k][i] = x;
      const double err = relative_error(analytic[i], (plus - minus) / (2.0 * step));
      ++result.checked;
      if (err > result.max_error) {
        result.max_error = err;
        result.worst = "input " + std::to_string(k) + " entry " + std::to_string(i);
      }
    }
  }
  return result;
}

std::vector<std::string> primitive_ops() {
  return {"matmul",      "sigmoid",     "tanh",     "relu",       "exp",
          "add",         "sub",         "mul",      "affine",     "add_bias",
          "mul_column",  "softmax",     "log_softmax", "concat",  "reduce_sum",
          "reduce_mean", "reduce_max",  "sum_all",  "embedding_lookup", "gather_rows",
          "scatter_add_rows", "slice",  "pick",     "dropout"};
}

GradCheck check_primitive(const std::string& op, std::uint64_t seed, double step) {
  std::mt19937_64 rng(seed);
  auto r = [&](Shape s) { return random_tensor(rng, std::move(s)); };
  OpBuilder build;
  std::vector<Tensor> in;

  if (op == "matmul") {
    in = {r({3, 4}), r({4, 2})};
    build = [](auto x) { return matmul(x[0], x[1]); };
  } else if (op == "sigmoid" || op == "tanh" || op == "exp") {
    in = {r({3, 4})};
    const UnaryOp u = op == "sigmoid" ? UnaryOp::sigmoid : op == "tanh" ? UnaryOp::tanh : UnaryOp::exp;
    build = [u](auto x) { return elementwise(u, x[0]); };
  } else if (op == "relu") {
    Tensor x = r({3, 4});
    for (auto& v : x.storage()) v += v < 0 ? -0.1 : 0.1;  // stay clear of the kink
    in = {x};
    build = [](auto x) { return relu(x[0]); };
  } else if (op == "add" || op == "sub" || op == "mul") {
    in = {r({3, 4}), r({3, 4})};
    const BinaryOp b = op == "add" ? BinaryOp::add : op == "sub" ? BinaryOp::sub : BinaryOp::mul;
    build = [b](auto x) { return elementwise(b, x[0], x[1]); };
  } else if (op == "affine") {
    in = {r({3, 4})};
    build = [](auto x) { return affine(x[0], 1.7, -0.3); };
  } else if (op == "add_bias") {
    in = {r({3, 4}), r({4})};
    build = [](auto x) { return add_bias(x[0], x[1]); };
  } else if (op == "mul_column") {
    in = {r({3, 4}), r({3, 1})};
    build = [](auto x) { return mul_column(x[0], x[1]); };
  } else if (op == "softmax") {
    in = {r({3, 4})};
    build = [](auto x) { return softmax(x[0], 1); };
  } else if (op == "log_softmax") {
    in = {r({3, 4})};
    build = [](auto x) { return log_softmax(x[0], 1); };
  } else if (op == "concat") {
    in = {r({3, 2}), r({3, 3})};
    build = [](auto x) { return concat({x[0], x[1]}, 1); };
  } else if (op == "reduce_sum" || op == "reduce_mean" || op == "reduce_max") {
    in = {r({3, 4})};
    const ReduceOp m = op == "reduce_sum" ? ReduceOp::sum : op == "reduce_mean" ? ReduceOp::mean : ReduceOp::max;
    build = [m](auto x) { return reduce(m, x[0], 0); };
  } else if (op == "sum_all") {
    in = {r({3, 4})};
    build = [](auto x) { return sum_all(x[0]); };
  } else if (op == "embedding_lookup") {
    in = {r({5, 3})};
    build = [](auto x) { return embedding_lookup(x[0], 2); };
  } else if (op == "gather_rows") {
    in = {r({4, 3})};
    build = [](auto x) {
      const std::size_t idx[] = {2, 0, 2};
      return gather_rows(x[0], idx);
    };
  } else if (op == "scatter_add_rows") {
    in = {r({3, 2})};
    build = [](auto x) {
      const std::size_t idx[] = {1, 1, 0};
      return scatter_add_rows(x[0], idx, 3);
    };
  } else if (op == "slice") {
    in = {r({3, 5})};
    build = [](auto x) { return slice(x[0], 1, 1, 3); };
  } else if (op == "pick") {
    in = {r({3, 4})};
    build = [](auto x) {
      const std::size_t idx[] = {1, 3, 0};
      return pick(x[0], idx);
    };
  } else if (op == "dropout") {
    in = {r({3, 4})};
    build = [seed](auto x) {
      std::mt19937_64 mask_rng(seed ^ 0x5bd1e995u);
      return dropout(x[0], 0.5, mask_rng);
    };
  } else {
    throw std::invalid_argument("unknown primitive op '" + op + "'");
  }
  return check_vjp(build, in, step, rng);
}

// ---------------------------------------------------------------------------

FrozenBatch freeze_batch(const Model& model, const Corpus& batch, bool inject_gold) {
  FrozenBatch fb;
  for (const auto& raw : batch) {
    Sentence s = truncate(raw, model.config().max_len);
    InputFeatures f = featurize(s, model.catalog());
    Tape tape;
    ParamBinder bind(tape, model.params());
    const ForwardPass pass = forward(bind, model, f);
    fb.candidates.push_back(training_candidates(pass.trigger.logits.value(), s, inject_gold));
    fb.sentences.push_back(std::move(s));
    fb.inputs.push_back(std::move(f));
  }
  return fb;
}

double batch_objective(const Model& model, const FrozenBatch& batch, const LossConfig& loss, double l2) {
  double total = l2_penalty(model.params(), l2);
  for (std::size_t i = 0; i < batch.sentences.size(); ++i) {
    Tape tape;
    ParamBinder bind(tape, model.params());
    total += sentence_loss(bind, model, batch.sentences[i], batch.inputs[i], loss, {}, &batch.candidates[i])
                 .loss.value()
                 .item();
  }
  return total;
}

GradientBuffer batch_gradient(const Model& model, const FrozenBatch& batch, const LossConfig& loss, double l2) {
  GradientBuffer grads(model.params());
  for (std::size_t i = 0; i < batch.sentences.size(); ++i) {
    Tape tape;
    ParamBinder bind(tape, model.params());
    SentenceLoss sl = sentence_loss(bind, model, batch.sentences[i], batch.inputs[i], loss, {}, &batch.candidates[i]);
    tape.backward(sl.loss);
    grads.accumulate(tape);
  }
  add_l2_gradient(grads, model.params(), l2);
  return grads;
}

GradCheck check_model_gradients(Model model, const Corpus& batch, const LossConfig& loss, double l2,
                                double step, std::size_t sample, std::uint64_t seed) {
  const FrozenBatch fb = freeze_batch(model, batch);
  const GradientBuffer grads = batch_gradient(model, fb, loss, l2);
  std::mt19937_64 rng(seed);
  GradCheck result;
  for (std::size_t slot = 0; slot < model.params().size(); ++slot) {
    Tensor& value = model.params()[slot].value;
    std::vector<std::size_t> entries(value.size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (sample > 0 && sample < entries.size()) {
      for (std::size_t i = 0; i < sample; ++i) std::swap(entries[i], entries[i + below(rng, entries.size() - i)]);
      entries.resize(sample);
    }
    for (std::size_t i : entries) {
      const double x = value[i];
      value[i] = x + step;
      const double plus = batch_objective(model, fb, loss, l2);
      value[i] = x - step;
      const double minus = batch_objective(model, fb, loss, l2);
      value[i] = x;
      const double err = relative_error(grads[slot][i], (plus - minus) / (2.0 * step));
      ++result.checked;
      if (err > result.max_error) {
        result.max_error = err;
        result.worst = model.params()[slot].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

Sentence random_tree_sentence(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[below(rng, i)]);
  Sentence s;
  s.tokens.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.tokens[i] = {"t" + std::to_string(i), "NN", kRootHead, "dep"};
  if (n == 0) return s;
  s.tokens[order[0]].deprel = "root";
  for (std::size_t k = 1; k < n; ++k) s.tokens[order[k]].head = static_cast<int>(order[below(rng, k)]);
  return s;
}

Tensor dense_gcn_reference(const Tensor& h, const TypedGraph& graph, const GcnWeights& wt) {
  const std::size_t n = graph.n, in = h.cols(), out = wt.w[0].cols();
  // adjacency[l][u][v] counts edges u -> v with label l.
  std::vector<std::vector<std::vector<int>>> adjacency(kNumEdgeLabels,
                                                       std::vector<std::vector<int>>(n, std::vector<int>(n, 0)));
  for (const Edge& e : graph.edges) ++adjacency[static_cast<std::size_t>(e.label)][e.source][e.target];

  Tensor result({n, out}, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t c = 0; c < out; ++c) {
      double acc = 0.0;
      for (std::size_t l = 0; l < kNumEdgeLabels; ++l) {
        for (std::size_t u = 0; u < n; ++u) {
          const int count = adjacency[l][u][v];
          if (count == 0) continue;
          double gate_pre = wt.d[l][0];
          double message = wt.b[l][c];
          for (std::size_t k = 0; k < in; ++k) {
            gate_pre += h.at(u, k) * wt.v[l][k];
            message += h.at(u, k) * wt.w[l].at(k, c);
          }
          acc += count * message / (1.0 + std::exp(-gate_pre));
        }
      }
      result.at(v, c) = acc > 0.0 ? acc : 0.0;
    }
  }
  return result;
}

double gcn_oracle_max_error(std::size_t draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t draw = 0; draw < draws; ++draw) {
    const std::size_t n = 1 + below(rng, 12);
    const std::size_t in = 1 + below(rng, 6), out = 1 + below(rng, 6);
    const TypedGraph graph = build_typed_graph(random_tree_sentence(rng, n));
    GcnWeights wt;
    ParamStore store;
    GcnLayerSlots slots;
    for (std::size_t l = 0; l < kNumEdgeLabels; ++l) {
      wt.w[l] = random_tensor(rng, {in, out});
      wt.b[l] = random_tensor(rng, {out});
      wt.v[l] = random_tensor(rng, {in, 1});
      wt.d[l] = random_tensor(rng, {1});
      const std::string p = std::to_string(l);
      slots.w[l] = store.add("W" + p, wt.w[l]);
      slots.b[l] = store.add("b" + p, wt.b[l]);
      slots.v[l] = store.add("V" + p, wt.v[l]);
      slots.d[l] = store.add("d" + p, wt.d[l]);
    }
    const Tensor h = random_tensor(rng, {n, in}, 2.0);
    Tape tape;
    ParamBinder bind(tape, store);
    const Tensor fast = gcn_layer(bind, slots, graph, tape.constant(h)).value();
    const Tensor slow = dense_gcn_reference(h, graph, wt);
    for (std::size_t i = 0; i < fast.size(); ++i) worst = std::max(worst, std::abs(fast[i] - slow[i]));
  }
  return worst;
}

// ---------------------------------------------------------------------------

std::vector<TriggerSpan> reference_decode(std::span<const std::size_t> tags) {
  const std::size_t n = tags.size();
  auto valid = [](std::size_t t) { return t != labels::kOutsideTag && t < labels::kNumTriggerTags; };
  auto begin_of = [](std::size_t sub) { return labels::begin_tag(sub); };
  auto inside_of = [](std::size_t sub) { return labels::inside_tag(sub); };
  std::vector<TriggerSpan> out;
  for (std::size_t s = 0; s < n; ++s) {
    if (!valid(tags[s])) continue;
    const std::size_t sub = labels::tag_subtype(tags[s]);
    const bool continues = s > 0 && tags[s] == inside_of(sub) &&
                           (tags[s - 1] == begin_of(sub) || tags[s - 1] == inside_of(sub));
    if (continues) continue;
    for (std::size_t e = s + 1; e <= n; ++e) {
      bool inner = true;
      for (std::size_t k = s + 1; k < e; ++k) inner = inner && tags[k] == inside_of(sub);
      if (inner && (e == n || tags[e] != inside_of(sub))) out.push_back({s, e, sub});
    }
  }
  return out;
}

std::size_t bio_roundtrip_failures(std::size_t trials, std::uint64_t seed, std::string* detail) {
  std::mt19937_64 rng(seed);
  std::size_t failures = 0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::size_t n = 1 + below(rng, 16);
    Sentence s;
    s.tokens.assign(n, Token{"w", "NN", kRootHead, "root"});
    std::vector<TriggerSpan> spans;
    for (std::size_t i = 0; i < n;) {
      if (uniform(rng, 0, 1) < 0.35) {
        const std::size_t len = 1 + below(rng, std::min<std::size_t>(3, n - i));
        const std::size_t sub = below(rng, labels::kNumSubtypes);
        spans.push_back({i, i + len, sub});
        s.events.push_back({i, i + len, sub, {}});
        i += len;
      } else {
        ++i;
      }
    }
    const auto decoded = decode_trigger_spans(encode_trigger_bio(s));
    if (decoded != spans) {
      if (failures == 0 && detail) *detail = "trial " + std::to_string(trial) + " (n=" + std::to_string(n) + ")";
      ++failures;
    }
  }
  return failures;
}

std::size_t bio_bruteforce_failures(std::size_t max_len, std::string* detail) {
  const std::size_t die = labels::subtype_id("Die"), attack = labels::subtype_id("Attack");
  const std::array<std::size_t, 5> alphabet = {labels::kOutsideTag, labels::begin_tag(die), labels::inside_tag(die),
                                               labels::begin_tag(attack), labels::inside_tag(attack)};
  std::size_t failures = 0;
  for (std::size_t n = 1; n <= max_len; ++n) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= alphabet.size();
    for (std::size_t code = 0; code < total; ++code) {
      std::vector<std::size_t> tags(n);
      Tensor scores({n, labels::kNumTriggerTags}, 0.0);
      for (std::size_t i = 0, c = code; i < n; ++i, c /= alphabet.size()) {
        tags[i] = alphabet[c % alphabet.size()];
        scores.at(i, tags[i]) = 1.0;
      }
      const auto expected = reference_decode(tags);
      if (decode_trigger_spans(tags) != expected || extract_candidates(scores) != expected) {
        if (failures == 0 && detail) {
          std::ostringstream os;
          for (auto t : tags) os << labels::tag_name(t) << ' ';
          *detail = os.str();
        }
        ++failures;
      }
    }
  }
  return failures;
}

double scalar_joint_loss(const std::vector<std::vector<double>>& trigger_logits,
                         const std::vector<std::size_t>& gold_tags,
                         const std::vector<std::vector<double>>& role_logits,
                         const std::vector<std::size_t>& gold_roles, double alpha, double beta) {
  auto log_prob = [](const std::vector<double>& row, std::size_t k) {
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - m);
    return row[k] - m - std::log(z);
  };
  double loss = 0.0;
  for (std::size_t i = 0; i < trigger_logits.size(); ++i)
    loss -= (gold_tags[i] == labels::kOutsideTag ? 1.0 : alpha) * log_prob(trigger_logits[i], gold_tags[i]);
  for (std::size_t j = 0; j < role_logits.size(); ++j) loss -= beta * log_prob(role_logits[j], gold_roles[j]);
  return loss;
}

// ---------------------------------------------------------------------------

namespace {

std::string format_error(double e) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << e;
  return os.str();
}

CheckOutcome loss_hand_check(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t die = labels::subtype_id("Die");
  const std::vector<std::size_t> tags = {labels::kOutsideTag, labels::begin_tag(die), labels::kOutsideTag};
  const Tensor logits = random_tensor(rng, {3, labels::kNumTriggerTags}, 3.0);
  const Tensor roles = random_tensor(rng, {2, labels::kNumRoles}, 3.0);
  const std::vector<std::size_t> gold_roles = {labels::role_id("Victim"), labels::kOtherRole};
  auto rows = [](const Tensor& t) {
    std::vector<std::vector<double>> out(t.rows());
    for (std::size_t r = 0; r < t.rows(); ++r)
      for (std::size_t c = 0; c < t.cols(); ++c) out[r].push_back(t.at(r, c));
    return out;
  };

  double worst = 0.0;
  Tape tape;
  Var l = tape.constant(logits), r = tape.constant(roles);
  // Bias off, no candidates: plain token NLL.
  worst = std::max(worst, std::abs(joint_loss(l, tags, {}, {}, {1.0, 1.0}).value().item() -
                                   scalar_joint_loss(rows(logits), tags, {}, {}, 1.0, 1.0)));
  worst = std::max(worst, std::abs(joint_loss(l, tags, {}, {}, {5.0, 2.0}).value().item() -
                                   scalar_joint_loss(rows(logits), tags, {}, {}, 5.0, 2.0)));
  worst = std::max(worst, std::abs(joint_loss(l, tags, r, gold_roles, {5.0, 2.0}).value().item() -
                                   scalar_joint_loss(rows(logits), tags, rows(roles), gold_roles, 5.0, 2.0)));
  return {"loss hand-check", worst <= 1e-12, "max |difference| " + format_error(worst)};
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.word_dim = 6;
  c.pos_dim = 3;
  c.position_dim = 3;
  c.entity_dim = 3;
  c.lstm_hidden = 4;
  c.gcn_hidden = 4;
  c.gcn_layers = 2;
  c.attention_hidden = 5;
  c.transform_hidden = 4;
  c.max_len = 24;
  return c;
}

}  // namespace

std::vector<CheckOutcome> run_selfcheck(std::uint64_t seed) {
  std::vector<CheckOutcome> out;
  for (const auto& op : primitive_ops()) {
    const GradCheck g = check_primitive(op, seed);
    out.push_back({"gradient " + op, g.max_error < 1e-6,
                   "max rel-err " + format_error(g.max_error) + " over " + std::to_string(g.checked) + " entries"});
  }

  {
    const Corpus batch = generate_synthetic_corpus(seed, 2, 1.0);
    ModelConfig cfg = tiny_config();
    cfg.seed = seed;
    const Model model(cfg, LabelCatalog::build(batch, 1));
    const GradCheck g = check_model_gradients(model, batch, LossConfig{}, 1e-8, 1e-6, 4, seed);
    out.push_back({"gradient joint loss", g.max_error < 1e-4,
                   "max rel-err " + format_error(g.max_error) + " over " + std::to_string(g.checked) +
                       " sampled entries" + (g.max_error < 1e-4 ? "" : ", worst " + g.worst)});
  }

  const double gcn = gcn_oracle_max_error(50, seed);
  out.push_back({"gcn dense oracle", gcn <= 1e-9, "max |difference| " + format_error(gcn) + " over 50 draws"});

  std::string detail;
  const std::size_t rt = bio_roundtrip_failures(2000, seed, &detail);
  out.push_back({"bio round-trip", rt == 0, rt == 0 ? "2000 span sets" : std::to_string(rt) + " failures, first " + detail});
  detail.clear();
  const std::size_t bf = bio_bruteforce_failures(4, &detail);
  out.push_back({"bio brute force", bf == 0,
                 bf == 0 ? "all sequences up to length 4" : std::to_string(bf) + " failures, first " + detail});

  out.push_back(loss_hand_check(seed));
  return out;
}

}  // namespace jmee::verify
