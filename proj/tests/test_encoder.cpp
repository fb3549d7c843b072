#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "jmee/encoder.hpp"
#include "jmee/verify.hpp"

using namespace jmee;
using namespace jmee::ad;

namespace {

Model tiny_model(const Sentence& s, std::size_t layers = 2) {
  return Model(fixtures::tiny_config(layers), LabelCatalog::build({s}));
}

void fill_random(Tensor& t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (auto& v : t.storage()) v = u(rng);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(ModelConfig, DefaultsMatchPublishedSetting) {
  const ModelConfig c;
  EXPECT_EQ(c.embedding_width(), 450u);
  EXPECT_EQ(c.gcn_layers, 3u);
  EXPECT_EQ(c.lstm_hidden, 220u);
  EXPECT_EQ(c.attention_hidden, 300u);
  EXPECT_EQ(c.transform_hidden, 200u);
  EXPECT_EQ(c.max_len, 50u);
}

TEST(EncoderParams, ThreeLabelsPerLayer) {
  const Sentence s = fixtures::two_event_sentence();
  const Model m(ModelConfig{}, LabelCatalog::build({s}));
  ASSERT_EQ(m.encoder().gcn.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& layer = m.encoder().gcn[k];
    const Shape w_shape = k == 0 ? Shape{440, 220} : Shape{220, 220};
    for (std::size_t l = 0; l < kNumEdgeLabels; ++l) {
      EXPECT_EQ(m.params()[layer.w[l]].value.shape(), w_shape);
      EXPECT_EQ(m.params()[layer.b[l]].value.size(), 220u);
      EXPECT_EQ(m.params()[layer.v[l]].value.size(), w_shape[0]);
      EXPECT_EQ(m.params()[layer.d[l]].value.size(), 1u);
    }
  }
  EXPECT_EQ(m.params()[m.encoder().position].value.dim(0), 2 * 50u - 1);
}

TEST(Embedding, WidthAndEntitySums) {
  Sentence s = fixtures::two_event_sentence();
  s.entities = {{0, 2, "PER"}, {1, 2, "ORG"}};
  s.events.clear();
  const Model m(ModelConfig{}, LabelCatalog::build({s}));
  const InputFeatures in = featurize(s, m.catalog());
  Tape tape;
  ParamBinder bind(tape, m.params());
  Var x = embed_tokens(bind, m.encoder(), in);
  ASSERT_EQ(x.shape(), (Shape{s.size(), 450}));

  const Tensor& table = m.params()[m.encoder().entity].value;
  const std::size_t off = 400;
  const std::size_t per = m.catalog().entity_types.find("PER").value();
  const std::size_t org = m.catalog().entity_types.find("ORG").value();
  for (std::size_t k = 0; k < 50; ++k) {
    EXPECT_DOUBLE_EQ(x.value().at(5, off + k), table.at(kEntityNoneTag, k));
    EXPECT_DOUBLE_EQ(x.value().at(1, off + k),
                     table.at(entity_inside_tag(per), k) + table.at(entity_begin_tag(org), k));
  }
}

TEST(Embedding, UnknownWordsMapToUnk) {
  const Sentence s = fixtures::two_event_sentence();
  const Model m = tiny_model(s);
  Sentence other = s;
  other.tokens[0].form = "never-seen";
  const InputFeatures in = featurize(other, m.catalog());
  EXPECT_EQ(in.words[0], LabelCatalog::kUnkId);
}

TEST(BiLstm, SingleStepIsTwoIndependentCells) {
  const Sentence s = fixtures::two_event_sentence();
  const Model m = tiny_model(s);
  const auto& p = m.params();
  const auto& e = m.encoder();
  const std::size_t h = 4, in = 15;
  std::mt19937_64 rng(3);
  Tensor x({1, in});
  fill_random(x, rng);
  Tape tape;
  ParamBinder bind(tape, p);
  const Tensor out = bilstm_encode(bind, e.forward, e.backward, tape.constant(x)).value();
  ASSERT_EQ(out.shape(), (Shape{1, 2 * h}));
  // One LSTM step from zero state, written out by hand.
  auto cell = [&](const LstmSlots& sl, std::size_t k) {
    const Tensor& wx = p[sl.w_x].value;
    const Tensor& b = p[sl.b].value;
    auto gate = [&](std::size_t block) {
      double z = b[block * h + k];
      for (std::size_t j = 0; j < in; ++j) z += x[j] * wx.at(j, block * h + k);
      return z;
    };
    auto sig = [](double z) { return 1 / (1 + std::exp(-z)); };
    const double c = sig(gate(0)) * std::tanh(gate(2));
    return sig(gate(3)) * std::tanh(c);
  };
  for (std::size_t k = 0; k < h; ++k) {
    EXPECT_NEAR(out.at(0, k), cell(e.forward, k), 1e-14);
    EXPECT_NEAR(out.at(0, h + k), cell(e.backward, k), 1e-14);
  }
}

TEST(BiLstm, ReversalSwapsDirections) {
  const Sentence s = fixtures::two_event_sentence();
  const Model m = tiny_model(s);
  std::mt19937_64 rng(4);
  Tensor x({5, 15}), xr({5, 15});
  fill_random(x, rng);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t j = 0; j < 15; ++j) xr.at(4 - t, j) = x.at(t, j);
  // Swapping the parameter sets of the two directions and reversing time
  // must reproduce the original output with halves swapped.
  Model swapped = m;
  const auto& e = m.encoder();
  std::swap(swapped.params()[e.forward.w_x].value, swapped.params()[e.backward.w_x].value);
  std::swap(swapped.params()[e.forward.w_h].value, swapped.params()[e.backward.w_h].value);
  std::swap(swapped.params()[e.forward.b].value, swapped.params()[e.backward.b].value);
  Tape t1, t2;
  ParamBinder b1(t1, m.params()), b2(t2, swapped.params());
  const Tensor y = bilstm_encode(b1, e.forward, e.backward, t1.constant(x)).value();
  const Tensor yr = bilstm_encode(b2, e.forward, e.backward, t2.constant(xr)).value();
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_NEAR(y.at(t, k), yr.at(4 - t, 4 + k), 1e-14);
      EXPECT_NEAR(y.at(t, 4 + k), yr.at(4 - t, k), 1e-14);
    }
}

TEST(BiLstm, GradientOverThreeSteps) {
  const Sentence s = fixtures::two_event_sentence();
  const Model m = tiny_model(s);
  std::mt19937_64 rng(5);
  Tensor x({3, 15});
  fill_random(x, rng);
  const auto r = verify::check_vjp(
      [&](std::span<const Var> v) {
        ParamBinder bind(v[0].tape(), m.params());
        return bilstm_encode(bind, m.encoder().forward, m.encoder().backward, v[0]);
      },
      {x}, 1e-5, rng);
  EXPECT_LT(r.max_error, 1e-4) << r.worst;
}

TEST(Gcn, SingleNodeOnlyLoopFires) {
  const Sentence s = fixtures::two_event_sentence();
  const Model m = tiny_model(s);
  const auto& layer = m.encoder().gcn[1];  // 5 -> 5
  const auto& p = m.params();
  std::mt19937_64 rng(6);
  Tensor h({1, 5});
  fill_random(h, rng);
  Tape tape;
  ParamBinder bind(tape, p);
  const Tensor out = gcn_layer(bind, layer, loop_only_graph(1), tape.constant(h)).value();
  const std::size_t loop = static_cast<std::size_t>(EdgeLabel::loop);
  double gate = p[layer.d[loop]].value[0];
  for (std::size_t j = 0; j < 5; ++j) gate += h[j] * p[layer.v[loop]].value[j];
  gate = 1 / (1 + std::exp(-gate));
  for (std::size_t k = 0; k < 5; ++k) {
    double z = p[layer.b[loop]].value[k];
    for (std::size_t j = 0; j < 5; ++j) z += h[j] * p[layer.w[loop]].value.at(j, k);
    EXPECT_NEAR(out[k], std::max(0.0, gate * z), 1e-14);
  }
}

TEST(Gcn, ClosedGatesGiveZero) {
  const Sentence s = fixtures::two_event_sentence();
  Model m = tiny_model(s);
  const auto& layer = m.encoder().gcn[1];
  for (std::size_t l = 0; l < kNumEdgeLabels; ++l) m.params()[layer.d[l]].value.fill(-1e4);
  std::mt19937_64 rng(7);
  Tensor h({s.size(), 5});
  fill_random(h, rng);
  Tape tape;
  ParamBinder bind(tape, m.params());
  const Tensor out = gcn_layer(bind, layer, build_typed_graph(s), tape.constant(h)).value();
  for (double v : out.storage()) EXPECT_EQ(v, 0.0);
}

TEST(Gcn, OpenGatesOnLoopGraphIsDenseLayer) {
  const Sentence s = fixtures::two_event_sentence();
  Model m = tiny_model(s);
  const auto& layer = m.encoder().gcn[1];
  const std::size_t loop = static_cast<std::size_t>(EdgeLabel::loop);
  m.params()[layer.d[loop]].value.fill(1e4);
  m.params()[layer.v[loop]].value.fill(0.0);
  std::mt19937_64 rng(8);
  Tensor h({4, 5});
  fill_random(h, rng);
  Tape tape;
  ParamBinder bind(tape, m.params());
  const Tensor out = gcn_layer(bind, layer, loop_only_graph(4), tape.constant(h)).value();
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t k = 0; k < 5; ++k) {
      double z = m.params()[layer.b[loop]].value[k];
      for (std::size_t j = 0; j < 5; ++j) z += h.at(r, j) * m.params()[layer.w[loop]].value.at(j, k);
      EXPECT_NEAR(out.at(r, k), std::max(0.0, z), 1e-14);
    }
}

TEST(Gcn, DenseOracleOnRandomGraphs) { EXPECT_LT(verify::gcn_oracle_max_error(40, 9), 1e-9); }

TEST(Gcn, EdgeOrderAndNodePermutation) {
  std::mt19937_64 rng(10);
  const Sentence s = fixtures::two_event_sentence();
  const Model m = tiny_model(s);
  const auto& layer = m.encoder().gcn[1];
  const Sentence tree = verify::random_tree_sentence(rng, 9);
  TypedGraph g = build_typed_graph(tree);
  Tensor h({9, 5});
  fill_random(h, rng);
  auto run = [&](const TypedGraph& graph, const Tensor& in) {
    Tape tape;
    ParamBinder bind(tape, m.params());
    return gcn_layer(bind, layer, graph, tape.constant(in)).value();
  };
  const Tensor base = run(g, h);

  TypedGraph shuffled = g;
  std::shuffle(shuffled.edges.begin(), shuffled.edges.end(), rng);
  EXPECT_LT(max_abs_diff(run(shuffled, h), base), 1e-9);

  std::vector<std::size_t> pi(9);
  std::iota(pi.begin(), pi.end(), 0);
  std::shuffle(pi.begin(), pi.end(), rng);
  TypedGraph relabeled = g;
  for (auto& e : relabeled.edges) e = {pi[e.source], pi[e.target], e.label};
  Tensor hp({9, 5});
  for (std::size_t v = 0; v < 9; ++v)
    for (std::size_t k = 0; k < 5; ++k) hp.at(pi[v], k) = h.at(v, k);
  const Tensor out = run(relabeled, hp);
  for (std::size_t v = 0; v < 9; ++v)
    for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(out.at(pi[v], k), base.at(v, k), 1e-9);
}

TEST(Gcn, GraphSizeMismatch) {
  const Sentence s = fixtures::two_event_sentence();
  const Model m = tiny_model(s);
  Tape tape;
  ParamBinder bind(tape, m.params());
  EXPECT_THROW(gcn_layer(bind, m.encoder().gcn[1], loop_only_graph(3), tape.constant(Tensor({4, 5}))),
               DimensionError);
}

TEST(Highway, GateSaturation) {
  const Sentence s = fixtures::two_event_sentence();
  Model m = tiny_model(s);
  const auto& hw = m.encoder().highway[1];
  std::mt19937_64 rng(11);
  Tensor prev({3, 5}), conv({3, 5});
  fill_random(prev, rng);
  fill_random(conv, rng);
  auto run = [&] {
    Tape tape;
    ParamBinder bind(tape, m.params());
    return highway(bind, hw, tape.constant(prev), tape.constant(conv)).value();
  };
  m.params()[hw.b_t].value.fill(-1e4);
  Tensor out = run();
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], conv[i] + prev[i], 1e-12);

  m.params()[hw.b_t].value.fill(1e4);
  out = run();
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t k = 0; k < 5; ++k) {
      double z = m.params()[hw.b_h].value[k];
      for (std::size_t j = 0; j < 5; ++j) z += prev.at(r, j) * m.params()[hw.w_h].value.at(j, k);
      EXPECT_NEAR(out.at(r, k), conv.at(r, k) + std::max(0.0, z), 1e-12);
    }
}

TEST(Highway, GradientOnSmallInputs) {
  const Sentence s = fixtures::two_event_sentence();
  const Model m = tiny_model(s);
  std::mt19937_64 rng(12);
  Tensor prev({2, 5}), conv({2, 5});
  fill_random(prev, rng);
  fill_random(conv, rng);
  const auto r = verify::check_vjp(
      [&](std::span<const Var> v) {
        ParamBinder bind(v[0].tape(), m.params());
        return highway(bind, m.encoder().highway[1], v[0], v[1]);
      },
      {prev, conv}, 1e-5, rng);
  EXPECT_LT(r.max_error, 1e-4) << r.worst;
}

TEST(Encode, ZeroLayersIsLstmOutput) {
  const Sentence s = fixtures::two_event_sentence();
  const Model m = tiny_model(s, 0);
  Tape tape;
  ParamBinder bind(tape, m.params());
  const EncodedSentence enc = encode(bind, m, featurize(s, m.catalog()));
  EXPECT_EQ(enc.reps.value(), enc.lstm.value());
  EXPECT_TRUE(enc.layers.empty());
}

TEST(Encode, DeterministicWithoutDropoutAndRejectsLongInput) {
  const Sentence s = fixtures::two_event_sentence();
  const Model m = tiny_model(s);
  const InputFeatures in = featurize(s, m.catalog());
  Tape t1, t2;
  ParamBinder b1(t1, m.params()), b2(t2, m.params());
  EXPECT_EQ(encode(b1, m, in).reps.value(), encode(b2, m, in).reps.value());

  ModelConfig c = fixtures::tiny_config();
  c.max_len = 10;
  const Model small(c, m.catalog());
  Tape t3;
  ParamBinder b3(t3, small.params());
  EXPECT_THROW(encode(b3, small, in), DimensionError);
}

TEST(Encode, GradientOnFourTokenSentence) {
  Sentence s = fixtures::two_event_sentence();
  s = truncate(s, 4);
  const Model m = tiny_model(s);
  const InputFeatures in = featurize(s, m.catalog());
  std::mt19937_64 rng(13);
  // Perturb the embedded input; every encoder parameter sits downstream.
  Tape probe;
  ParamBinder pb(probe, m.params());
  const Tensor x0 = embed_tokens(pb, m.encoder(), in).value();
  const auto r = verify::check_vjp(
      [&](std::span<const Var> v) {
        ParamBinder bind(v[0].tape(), m.params());
        Var h = bilstm_encode(bind, m.encoder().forward, m.encoder().backward, v[0]);
        for (std::size_t k = 0; k < m.config().gcn_layers; ++k)
          h = highway(bind, m.encoder().highway[k], h, gcn_layer(bind, m.encoder().gcn[k], in.graph, h));
        return h;
      },
      {x0}, 1e-5, rng);
  EXPECT_LT(r.max_error, 1e-4) << r.worst;
}

TEST(Checkpoint, BitExactRoundTrip) {
  const Sentence s = fixtures::two_event_sentence();
  const Model m = tiny_model(s);
  const auto path = std::filesystem::temp_directory_path() / "jmee_test_model.ckpt";
  m.save(path);
  const Model back = Model::load(path);
  EXPECT_EQ(back.config(), m.config());
  EXPECT_TRUE(back.params() == m.params());
  EXPECT_EQ(back.catalog().words, m.catalog().words);
}
