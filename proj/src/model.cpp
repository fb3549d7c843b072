#include "jmee/model.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

namespace jmee {

using json = nlohmann::ordered_json;

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(word_dim, "word_dim");
  positive(pos_dim, "pos_dim");
  positive(position_dim, "position_dim");
  positive(entity_dim, "entity_dim");
  positive(lstm_hidden, "lstm_hidden");
  positive(gcn_hidden, "gcn_hidden");
  positive(attention_hidden, "attention_hidden");
  positive(transform_hidden, "transform_hidden");
  positive(max_len, "max_len");
}

std::string config_to_json(const ModelConfig& c) {
  json j{{"word_dim", c.word_dim},
         {"pos_dim", c.pos_dim},
         {"position_dim", c.position_dim},
         {"entity_dim", c.entity_dim},
         {"lstm_hidden", c.lstm_hidden},
         {"gcn_hidden", c.gcn_hidden},
         {"gcn_layers", c.gcn_layers},
         {"attention_hidden", c.attention_hidden},
         {"transform_hidden", c.transform_hidden},
         {"max_len", c.max_len},
         {"seed", c.seed}};
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  const json j = json::parse(text);
  ModelConfig c;
  c.word_dim = j.at("word_dim");
  c.pos_dim = j.at("pos_dim");
  c.position_dim = j.at("position_dim");
  c.entity_dim = j.at("entity_dim");
  c.lstm_hidden = j.at("lstm_hidden");
  c.gcn_hidden = j.at("gcn_hidden");
  c.gcn_layers = j.at("gcn_layers");
  c.attention_hidden = j.at("attention_hidden");
  c.transform_hidden = j.at("transform_hidden");
  c.max_len = j.at("max_len");
  c.seed = j.at("seed");
  return c;
}

InputFeatures featurize(const Sentence& s, const LabelCatalog& catalog) {
  InputFeatures f;
  f.words.reserve(s.size());
  f.pos.reserve(s.size());
  for (const auto& t : s.tokens) {
    f.words.push_back(catalog.word_id(t.form));
    f.pos.push_back(catalog.pos_id(t.pos));
  }
  f.entity_tags = encode_entity_bio(s, [&](const std::string& type) { return catalog.entity_type_id(type); });
  f.graph = build_typed_graph(s);
  return f;
}

// ---------------------------------------------------------------------------

namespace {

enum class Init { glorot, embedding, zero, one };

Tensor make_init(const Shape& shape, Init kind, std::mt19937_64& rng) {
  Tensor t(shape, 0.0);
  auto uniform = [&rng](double a) {
    return (static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0) * a;
  };
  switch (kind) {
    case Init::glorot: {
      const double fan_in = static_cast<double>(shape[0]);
      const double fan_out = static_cast<double>(shape.size() > 1 ? shape[1] : 1);
      const double a = std::sqrt(6.0 / (fan_in + fan_out));
      for (auto& v : t.storage()) v = uniform(a);
      break;
    }
    case Init::embedding:
      for (auto& v : t.storage()) v = uniform(0.1);
      break;
    case Init::zero:
      break;
    case Init::one:
      t.fill(1.0);
      break;
  }
  return t;
}

}  // namespace

Model::Model(ModelConfig config, LabelCatalog catalog)
    : config_(std::move(config)), catalog_(std::move(catalog)) {
  config_.validate();
  register_parameters(true);
}

Model::Model(ModelConfig config, LabelCatalog catalog, ParamStore params)
    : config_(std::move(config)), catalog_(std::move(catalog)), params_(std::move(params)) {
  config_.validate();
  register_parameters(false);
}

void Model::register_parameters(bool initialise) {
  std::mt19937_64 rng(config_.seed);
  auto param = [&](const std::string& name, Shape shape, Init kind) -> std::size_t {
    if (initialise) return params_.add(name, make_init(shape, kind, rng));
    const std::size_t s = params_.slot(name);
    if (params_[s].value.shape() != shape)
      throw std::runtime_error("parameter " + name + " has shape " +
                               shape_string(params_[s].value.shape()) + ", config expects " +
                               shape_string(shape));
    return s;
  };
  const auto& c = config_;

  encoder_.word = param("embed.word", {catalog_.words.size(), c.word_dim}, Init::embedding);
  encoder_.pos = param("embed.pos", {catalog_.pos.size(), c.pos_dim}, Init::embedding);
  encoder_.position = param("embed.position", {2 * c.max_len - 1, c.position_dim}, Init::embedding);
  encoder_.entity = param("embed.entity", {catalog_.entity_tag_count(), c.entity_dim}, Init::embedding);

  auto lstm = [&](const std::string& prefix) {
    LstmSlots s;
    const std::size_t h = c.lstm_hidden;
    s.w_x = param(prefix + ".w_x", {c.embedding_width(), 4 * h}, Init::glorot);
    s.w_h = param(prefix + ".w_h", {h, 4 * h}, Init::glorot);
    if (initialise) {
      Tensor b({4 * h}, 0.0);
      for (std::size_t k = h; k < 2 * h; ++k) b[k] = 1.0;  // forget gate
      s.b = params_.add(prefix + ".b", std::move(b));
    } else {
      s.b = param(prefix + ".b", {4 * h}, Init::zero);
    }
    return s;
  };
  encoder_.forward = lstm("lstm.fwd");
  encoder_.backward = lstm("lstm.bwd");

  encoder_.gcn.clear();
  encoder_.highway.clear();
  std::size_t in = c.lstm_width();
  for (std::size_t k = 0; k < c.gcn_layers; ++k) {
    const std::string layer = "gcn." + std::to_string(k);
    GcnLayerSlots g;
    for (std::size_t l = 0; l < kNumEdgeLabels; ++l) {
      const std::string p = layer + "." + std::string(edge_label_name(static_cast<EdgeLabel>(l)));
      g.w[l] = param(p + ".W", {in, c.gcn_hidden}, Init::glorot);
      g.b[l] = param(p + ".b", {c.gcn_hidden}, Init::zero);
      g.v[l] = param(p + ".V", {in, 1}, Init::glorot);
      g.d[l] = param(p + ".d", {1}, Init::zero);
    }
    encoder_.gcn.push_back(g);

    const std::string hw = "highway." + std::to_string(k);
    HighwaySlots h;
    h.w_t = param(hw + ".W_T", {in, c.gcn_hidden}, Init::glorot);
    h.b_t = param(hw + ".b_T", {c.gcn_hidden}, Init::zero);
    h.w_h = param(hw + ".W_H", {in, c.gcn_hidden}, Init::glorot);
    h.b_h = param(hw + ".b_H", {c.gcn_hidden}, Init::zero);
    if (in != c.gcn_hidden) h.w_carry = param(hw + ".W_carry", {in, c.gcn_hidden}, Init::glorot);
    encoder_.highway.push_back(h);
    in = c.gcn_hidden;
  }

  const std::size_t d = c.rep_width();
  heads_.w1 = param("attention.W1", {d, c.attention_hidden}, Init::glorot);
  heads_.b1 = param("attention.b1", {c.attention_hidden}, Init::zero);
  heads_.w2 = param("attention.W2", {c.attention_hidden, 1}, Init::glorot);
  heads_.b2 = param("attention.b2", {1}, Init::zero);
  heads_.wc = param("trigger.Wc", {2 * d, c.transform_hidden}, Init::glorot);
  heads_.bc = param("trigger.bc", {c.transform_hidden}, Init::zero);
  heads_.wt = param("trigger.Wt", {c.transform_hidden, labels::kNumTriggerTags}, Init::glorot);
  heads_.bt = param("trigger.bt", {labels::kNumTriggerTags}, Init::zero);
  heads_.wa = param("argument.Wa", {2 * c.transform_hidden, labels::kNumRoles}, Init::glorot);
  heads_.ba = param("argument.ba", {labels::kNumRoles}, Init::zero);

  if (!initialise && params_.size() != 0) {
    // Every stored tensor must have been claimed by the config.
    std::size_t expected = 4 + 6 + 2 + 8 + c.gcn_layers * (4 * kNumEdgeLabels + 4);
    for (const auto& h : encoder_.highway) expected += h.w_carry ? 1 : 0;
    if (params_.size() != expected)
      throw std::runtime_error("checkpoint holds " + std::to_string(params_.size()) +
                               " parameters, config expects " + std::to_string(expected));
  }
}

std::size_t Model::load_pretrained_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pretrained vectors " + path.string());
  Tensor& table = params_[encoder_.word].value;
  const std::size_t dim = config_.word_dim;
  std::size_t filled = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    std::vector<double> values;
    double v;
    while (ls >> v) values.push_back(v);
    if (values.size() != dim)
      throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                               std::to_string(dim) + " values, got " + std::to_string(values.size()));
    if (auto id = catalog_.words.find(word)) {
      std::copy(values.begin(), values.end(), table.data().begin() + static_cast<std::ptrdiff_t>(*id * dim));
      ++filled;
    }
  }
  return filled;
}

void Model::save(const std::filesystem::path& path) const {
  json header{{"format", "jmee-checkpoint"},
              {"config", json::parse(config_to_json(config_))},
              {"catalog",
               {{"words", catalog_.words.symbols()},
                {"pos", catalog_.pos.symbols()},
                {"entity_types", catalog_.entity_types.symbols()}}}};
  write_checkpoint(path, header.dump(), params_);
}

Model Model::load(const std::filesystem::path& path) {
  CheckpointData data = read_checkpoint(path);
  json header;
  try {
    header = json::parse(data.header);
  } catch (const json::exception&) {
    throw std::runtime_error(path.string() + ": corrupt checkpoint header");
  }
  if (header.value("format", "") != "jmee-checkpoint")
    throw std::runtime_error(path.string() + ": not a model checkpoint");
  ModelConfig config = config_from_json(header.at("config").dump());
  LabelCatalog catalog;
  catalog.words = Vocabulary(header.at("catalog").at("words").get<std::vector<std::string>>());
  catalog.pos = Vocabulary(header.at("catalog").at("pos").get<std::vector<std::string>>());
  catalog.entity_types =
      Vocabulary(header.at("catalog").at("entity_types").get<std::vector<std::string>>());
  return Model(std::move(config), std::move(catalog), std::move(data.params));
}

}  // namespace jmee
