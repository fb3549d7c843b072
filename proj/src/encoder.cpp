#include "jmee/encoder.hpp"

#include <numeric>

namespace jmee {

using namespace ad;

Var embed_tokens(ParamBinder& bind, const EncoderParams& params, const InputFeatures& input) {
  const std::size_t n = input.size();
  if (n == 0) throw DimensionError("embed_tokens: empty sentence");

  Var words = gather_rows(bind(params.word), input.words);
  Var pos = gather_rows(bind(params.pos), input.pos);
  std::vector<std::size_t> positions(n);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  Var position = gather_rows(bind(params.position), positions);

  std::vector<std::size_t> tag_ids;
  std::vector<std::size_t> owners;
  for (std::size_t i = 0; i < n; ++i) {
    if (input.entity_tags[i].empty()) {
      tag_ids.push_back(kEntityNoneTag);
      owners.push_back(i);
    }
    for (std::size_t tag : input.entity_tags[i]) {
      tag_ids.push_back(tag);
      owners.push_back(i);
    }
  }
  Var entity = scatter_add_rows(gather_rows(bind(params.entity), tag_ids), owners, n);
  return concat({words, pos, position, entity}, 1);
}

namespace {

Var lstm_direction(ParamBinder& bind, const LstmSlots& p, Var x, bool reverse) {
  const std::size_t n = x.value().rows();
  const std::size_t h = bind.store()[p.w_h].value.rows();
  Var projected = add_bias(matmul(x, bind(p.w_x)), bind(p.b));
  Var w_h = bind(p.w_h);

  std::vector<Var> outputs(n);
  Var hidden, cell;
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    const std::size_t row[] = {t};
    Var z = gather_rows(projected, row);
    if (hidden.valid()) z = add(z, matmul(hidden, w_h));
    Var in_gate = sigmoid(slice(z, 1, 0, h));
    Var forget_gate = sigmoid(slice(z, 1, h, h));
    Var candidate = tanh(slice(z, 1, 2 * h, h));
    Var out_gate = sigmoid(slice(z, 1, 3 * h, h));
    cell = cell.valid() ? add(mul(forget_gate, cell), mul(in_gate, candidate))
                        : mul(in_gate, candidate);
    hidden = mul(out_gate, tanh(cell));
    outputs[t] = hidden;
  }
  return concat(outputs, 0);
}

}  // namespace

Var bilstm_encode(ParamBinder& bind, const LstmSlots& forward, const LstmSlots& backward, Var x) {
  return concat({lstm_direction(bind, forward, x, false), lstm_direction(bind, backward, x, true)}, 1);
}

Var gcn_layer(ParamBinder& bind, const GcnLayerSlots& p, const TypedGraph& graph, Var h) {
  const std::size_t n = h.value().rows();
  if (graph.n != n)
    throw DimensionError("gcn_layer: graph has " + std::to_string(graph.n) + " nodes but input has " +
                         std::to_string(n) + " rows");
  std::vector<Var> per_label;
  for (std::size_t l = 0; l < kNumEdgeLabels; ++l) {
    std::vector<std::size_t> sources, targets;
    for (const Edge& e : graph.edges) {
      if (static_cast<std::size_t>(e.label) != l) continue;
      sources.push_back(e.source);
      targets.push_back(e.target);
    }
    if (sources.empty()) continue;
    Var from = gather_rows(h, sources);
    Var message = add_bias(matmul(from, bind(p.w[l])), bind(p.b[l]));
    Var gate = sigmoid(add_bias(matmul(from, bind(p.v[l])), bind(p.d[l])));
    per_label.push_back(scatter_add_rows(mul_column(message, gate), targets, n));
  }
  if (per_label.empty()) throw DimensionError("gcn_layer: graph has no edges");
  Var total = per_label[0];
  for (std::size_t i = 1; i < per_label.size(); ++i) total = add(total, per_label[i]);
  return relu(total);
}

Var highway(ParamBinder& bind, const HighwaySlots& p, Var prev, Var conv) {
  Var transform = sigmoid(add_bias(matmul(prev, bind(p.w_t)), bind(p.b_t)));
  Var candidate = relu(add_bias(matmul(prev, bind(p.w_h)), bind(p.b_h)));
  Var carried = p.w_carry ? matmul(prev, bind(*p.w_carry)) : prev;
  if (carried.shape() != conv.shape())
    throw DimensionError("highway: carry " + shape_string(carried.shape()) + " vs convolution " +
                         shape_string(conv.shape()));
  Var carry_gate = affine(transform, -1.0, 1.0);
  return add(conv, add(mul(transform, candidate), mul(carry_gate, carried)));
}

EncodedSentence encode(ParamBinder& bind, const Model& model, const InputFeatures& input,
                       const DropoutContext& dropout) {
  const auto& cfg = model.config();
  if (input.size() > cfg.max_len)
    throw DimensionError("encode: sentence of " + std::to_string(input.size()) +
                         " tokens exceeds max_len " + std::to_string(cfg.max_len));
  const EncoderParams& p = model.encoder();
  EncodedSentence out;
  out.embedded = embed_tokens(bind, p, input);
  out.lstm = bilstm_encode(bind, p.forward, p.backward, dropout.apply(out.embedded));
  Var h = out.lstm;
  for (std::size_t k = 0; k < cfg.gcn_layers; ++k) {
    Var conv = gcn_layer(bind, p.gcn[k], input.graph, h);
    h = dropout.apply(highway(bind, p.highway[k], h, conv));
    out.gcn_conv.push_back(conv);
    out.layers.push_back(h);
  }
  out.reps = h;
  return out;
}

}  // namespace jmee
