#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "jmee/corpus.hpp"
#include "jmee/params.hpp"
#include "jmee/vocab.hpp"

namespace jmee {

/// Network dimensions. Defaults follow the published setting; the Bi-LSTM
/// width is per direction.
struct ModelConfig {
  std::size_t word_dim = 300;
  std::size_t pos_dim = 50;
  std::size_t position_dim = 50;
  std::size_t entity_dim = 50;
  std::size_t lstm_hidden = 220;
  std::size_t gcn_hidden = 220;
  std::size_t gcn_layers = 3;
  std::size_t attention_hidden = 300;
  std::size_t transform_hidden = 200;
  std::size_t max_len = 50;
  std::uint64_t seed = 1;

  std::size_t embedding_width() const { return word_dim + pos_dim + position_dim + entity_dim; }
  std::size_t lstm_width() const { return 2 * lstm_hidden; }
  /// Width of the final token representations D.
  std::size_t rep_width() const { return gcn_layers == 0 ? lstm_width() : gcn_hidden; }

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct LstmSlots {
  std::size_t w_x = 0;  // in x 4h, gate blocks ordered input, forget, cell, output
  std::size_t w_h = 0;  // h x 4h
  std::size_t b = 0;    // 4h
};

/// Gated typed convolution for one layer; arrays are indexed by EdgeLabel.
struct GcnLayerSlots {
  std::array<std::size_t, kNumEdgeLabels> w{};  // in x h
  std::array<std::size_t, kNumEdgeLabels> b{};  // h
  std::array<std::size_t, kNumEdgeLabels> v{};  // in x 1, scalar edge gate
  std::array<std::size_t, kNumEdgeLabels> d{};  // 1
};

struct HighwaySlots {
  std::size_t w_t = 0, b_t = 0;  // transform gate, in x h
  std::size_t w_h = 0, b_h = 0;  // candidate, in x h
  /// Carry projection in x h, present only when the layer input width
  /// differs from h.
  std::optional<std::size_t> w_carry;
};

struct EncoderParams {
  std::size_t word = 0, pos = 0, position = 0, entity = 0;
  LstmSlots forward, backward;
  std::vector<GcnLayerSlots> gcn;
  std::vector<HighwaySlots> highway;
};

struct HeadParams {
  std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;  // attention scorer
  std::size_t wc = 0, bc = 0;                  // trigger transform
  std::size_t wt = 0, bt = 0;                  // trigger output, 67 logits
  std::size_t wa = 0, ba = 0;                  // argument output, 37 logits
};

/// Id-level view of one (already truncated) sentence.
struct InputFeatures {
  std::vector<std::size_t> words;
  std::vector<std::size_t> pos;
  std::vector<std::vector<std::size_t>> entity_tags;
  TypedGraph graph;

  std::size_t size() const { return words.size(); }
};

InputFeatures featurize(const Sentence& sentence, const LabelCatalog& catalog);

class Model {
 public:
  /// Fresh parameters initialised from config.seed.
  Model(ModelConfig config, LabelCatalog catalog);

  const ModelConfig& config() const { return config_; }
  const LabelCatalog& catalog() const { return catalog_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }
  const EncoderParams& encoder() const { return encoder_; }
  const HeadParams& heads() const { return heads_; }

  /// Overwrites word-embedding rows for vocabulary words found in a text file
  /// of `word v1 ... v_d` lines. Returns the number of rows filled.
  std::size_t load_pretrained_vectors(const std::filesystem::path& path);

  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

 private:
  Model(ModelConfig config, LabelCatalog catalog, ParamStore params);
  void register_parameters(bool initialise);

  ModelConfig config_;
  LabelCatalog catalog_;
  ParamStore params_;
  EncoderParams encoder_;
  HeadParams heads_;
};

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

}  // namespace jmee
