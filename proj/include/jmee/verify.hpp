#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "jmee/training.hpp"

namespace jmee::verify {

/// |a - n| / max(1, |a| + |n|).
double relative_error(double analytic, double numeric);

struct GradCheck {
  double max_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // location of max_error
};

using OpBuilder = std::function<ad::Var(std::span<const ad::Var>)>;

/// Compares the reverse-mode vector-Jacobian product of `build` with central
/// differences of <seed, build(inputs)> for every input entry, using a random
/// seed drawn from `rng`.
GradCheck check_vjp(const OpBuilder& build, const std::vector<Tensor>& inputs, double step,
                    std::mt19937_64& rng);

/// Names accepted by check_primitive, matching the op names on the tape.
std::vector<std::string> primitive_ops();
GradCheck check_primitive(const std::string& op, std::uint64_t seed, double step = 1e-5);

/// Total objective of `batch` (sentences already truncated) plus the l2
/// term, with candidates frozen at the current parameters.
struct FrozenBatch {
  std::vector<Sentence> sentences;
  std::vector<InputFeatures> inputs;
  std::vector<std::vector<TriggerSpan>> candidates;
};
FrozenBatch freeze_batch(const Model& model, const Corpus& batch, bool inject_gold = true);
double batch_objective(const Model& model, const FrozenBatch& batch, const LossConfig& loss, double l2);
GradientBuffer batch_gradient(const Model& model, const FrozenBatch& batch, const LossConfig& loss, double l2);

/// Finite-difference check of every parameter entry (or of `sample` random
/// entries per tensor when nonzero).
GradCheck check_model_gradients(Model model, const Corpus& batch, const LossConfig& loss, double l2,
                                double step, std::size_t sample = 0, std::uint64_t seed = 1);

/// Random dependency tree over n tokens (one root, every head chain reaches
/// it). Forms are t0, t1, ...
Sentence random_tree_sentence(std::mt19937_64& rng, std::size_t n);

struct GcnWeights {
  std::array<Tensor, kNumEdgeLabels> w, b, v, d;
};

/// Gated typed graph convolution evaluated from dense per-label adjacency
/// matrices with explicit loops.
Tensor dense_gcn_reference(const Tensor& h, const TypedGraph& graph, const GcnWeights& weights);

/// Largest |gcn_layer - dense reference| over `draws` random graphs and
/// parameter sets.
double gcn_oracle_max_error(std::size_t draws, std::uint64_t seed);

/// Reference span decoder written as a predicate over candidate spans.
std::vector<TriggerSpan> reference_decode(std::span<const std::size_t> tags);

/// encode/decode identity on random non-overlapping span sets. Returns the
/// number of failures; `detail` receives the first.
std::size_t bio_roundtrip_failures(std::size_t trials, std::uint64_t seed, std::string* detail = nullptr);

/// decode_trigger_spans and extract_candidates against reference_decode on
/// every sequence up to `max_len` over {O, B-Die, I-Die, B-Attack, I-Attack}.
std::size_t bio_bruteforce_failures(std::size_t max_len, std::string* detail = nullptr);

/// Scalar joint loss from plain logit tables, for cross-checking joint_loss.
double scalar_joint_loss(const std::vector<std::vector<double>>& trigger_logits,
                         const std::vector<std::size_t>& gold_tags,
                         const std::vector<std::vector<double>>& role_logits,
                         const std::vector<std::size_t>& gold_roles, double alpha, double beta);

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Fast end-to-end verification used by the `selfcheck` command.
std::vector<CheckOutcome> run_selfcheck(std::uint64_t seed = 1);

}  // namespace jmee::verify
