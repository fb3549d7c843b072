#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "jmee/corpus.hpp"

namespace jmee {

struct SentencePrediction;

struct PRF {
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;

  double precision() const;
  double recall() const;
  double f1() const;
  PRF& operator+=(const PRF& other);
  bool operator==(const PRF&) const = default;
};

struct EvalReport {
  PRF trigger_identification;
  PRF trigger_classification;
  PRF argument_identification;
  PRF argument_role;

  EvalReport& operator+=(const EvalReport& other);
  bool operator==(const EvalReport&) const = default;
};

/// Predicted events per sentence, aligned with the gold corpus. Argument
/// entity indices refer to the gold sentence's entity list.
using PredictionSet = std::vector<std::vector<EventMention>>;

/// Exact-offset matching, each gold item claimed at most once, predictions
/// visited in sentence order:
///   trigger identification  span
///   trigger classification  span + subtype
///   argument identification (event subtype, entity span)
///   argument role           (event subtype, entity span, role)
EvalReport score(const Corpus& gold, const PredictionSet& predicted);

/// Per-sentence contribution; `score` is the sum over sentences.
EvalReport score_sentence(const Sentence& gold, const std::vector<EventMention>& predicted);

enum class ArgumentSplit {
  single_structure,  // 1/1: exactly one gold event carries arguments
  single_argument,   // 1/1: exactly one gold argument in the sentence
};

struct SplitReport {
  EvalReport single;    // 1/1
  EvalReport multiple;  // 1/N
};

/// Trigger rows are bucketed by gold trigger count (split_1v1_1vN); argument
/// rows by `mode`. Sentences with nothing to bucket fall in neither subset.
SplitReport score_split(const Corpus& gold, const PredictionSet& predicted,
                        ArgumentSplit mode = ArgumentSplit::single_structure);

struct CooccurrenceMatrix {
  /// probability[a][b] = P(a B event occurs | an A event occurs) per sentence.
  std::array<std::array<double, labels::kNumSubtypes>, labels::kNumSubtypes> probability{};
  /// Number of sentences containing subtype a; rows with zero support are
  /// all-zero and should be ignored.
  std::array<std::size_t, labels::kNumSubtypes> support{};
};

CooccurrenceMatrix cooccurrence_stats(const Corpus& corpus);

/// Writes an n x n CSV: header row of quoted token forms, row i holds the
/// attention scores with position i set to zero.
void write_attention_csv(std::ostream& out, const std::vector<std::string>& forms,
                         const std::vector<double>& scores);
void export_attention(const SentencePrediction& prediction, const Sentence& sentence,
                      const std::filesystem::path& path);

std::string report_text(const EvalReport& report);
std::string split_report_text(const EvalReport& overall, const SplitReport& split);
std::string report_json(const EvalReport& report);
std::string split_report_json(const EvalReport& overall, const SplitReport& split);

}  // namespace jmee
