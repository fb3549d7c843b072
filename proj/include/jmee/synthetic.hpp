#pragma once

#include <array>
#include <cstdint>

#include "jmee/corpus.hpp"

namespace jmee {

using SubtypeMatrix = std::array<std::array<double, labels::kNumSubtypes>, labels::kNumSubtypes>;

/// Template grammar for synthetic sentences. Every sentence has one "hub"
/// event drawn from `hub_prior`; with probability `multi_event_rate` it also
/// gets a partner event drawn from row `hub` of `partner_weight`, and then
/// with probability `third_event_rate` a second mention of the hub subtype.
///
/// Trigger words are shared between paired subtypes, so a trigger's subtype
/// is fixed only by the cue adverb attached to it in the dependency tree.
struct SyntheticOptions {
  double multi_event_rate = 0.262;
  double third_event_rate = 0.3;
  double distractor_cue_rate = 0.5;  // per entity
  double particle_rate = 0.1;
  std::array<double, labels::kNumSubtypes> hub_prior{};
  SubtypeMatrix partner_weight{};

  /// Six uniform hubs (Attack, Meet, Transport, Die, Arrest-Jail, Elect);
  /// each remaining subtype is a partner of exactly one hub.
  static SyntheticOptions defaults(double multi_event_rate = 0.262);
  void validate() const;
};

/// Deterministic for fixed (seed, n, options).
Corpus generate_synthetic_corpus(std::uint64_t seed, std::size_t n,
                                 const SyntheticOptions& options = SyntheticOptions::defaults());
Corpus generate_synthetic_corpus(std::uint64_t seed, std::size_t n, double multi_event_rate);

/// Exact P(B present | A present) implied by `options`; rows of subtypes that
/// can never occur are zero.
SubtypeMatrix cooccurrence_ground_truth(const SyntheticOptions& options);

/// Exact probability that a sentence contains subtype A.
std::array<double, labels::kNumSubtypes> subtype_presence_probability(const SyntheticOptions& options);

}  // namespace jmee
