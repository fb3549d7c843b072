#pragma once

#include <random>
#include <vector>

#include "jmee/autodiff.hpp"
#include "jmee/model.hpp"

namespace jmee {

/// Training-time dropout; a null rng or zero rate disables it.
struct DropoutContext {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;

  bool active() const { return rng != nullptr && rate > 0.0; }
  ad::Var apply(ad::Var x) const { return active() ? ad::dropout(x, rate, *rng) : x; }
};

struct EncodedSentence {
  ad::Var embedded;                // n x embedding_width
  ad::Var lstm;                    // n x 2*lstm_hidden
  std::vector<ad::Var> gcn_conv;   // per layer, before the highway unit
  std::vector<ad::Var> layers;     // per layer, after the highway unit
  ad::Var reps;                    // n x rep_width, the matrix D
};

/// [word | pos | position | entity-tag sum] per token. Tokens without entity
/// tags use the NONE row.
ad::Var embed_tokens(ParamBinder& bind, const EncoderParams& params,
                     const InputFeatures& input);

/// Zero-initialised LSTMs in both directions; row t is [forward_t | backward_t].
ad::Var bilstm_encode(ParamBinder& bind, const LstmSlots& forward, const LstmSlots& backward,
                      ad::Var x);

/// Gated typed graph convolution:
///   out_v = ReLU( sum_{(u->v)} sigmoid(h_u . V_l + d_l) * (h_u W_l + b_l) )
/// where l is the label of edge (u->v).
ad::Var gcn_layer(ParamBinder& bind, const GcnLayerSlots& params, const TypedGraph& graph,
                  ad::Var h);

/// out = conv + t * ReLU(prev W_H + b_H) + (1 - t) * carry(prev),
/// t = sigmoid(prev W_T + b_T); carry is the identity unless the widths differ.
ad::Var highway(ParamBinder& bind, const HighwaySlots& params, ad::Var prev, ad::Var conv);

EncodedSentence encode(ParamBinder& bind, const Model& model, const InputFeatures& input,
                       const DropoutContext& dropout = {});

}  // namespace jmee
