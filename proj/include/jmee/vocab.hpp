#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "jmee/corpus.hpp"

namespace jmee {

inline constexpr std::string_view kPadSymbol = "<pad>";
inline constexpr std::string_view kUnkSymbol = "<unk>";

/// Dense symbol <-> id map; ids are insertion order.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> symbols);

  std::size_t add(std::string_view symbol);
  std::optional<std::size_t> find(std::string_view symbol) const;
  std::size_t lookup(std::string_view symbol, std::size_t fallback) const;
  const std::string& symbol(std::size_t id) const { return symbols_.at(id); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  std::size_t size() const { return symbols_.size(); }

  /// One symbol per line; id = line number (0-based).
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool operator==(const Vocabulary& other) const { return symbols_ == other.symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Input vocabularies. Words and POS reserve id 0 for padding and 1 for
/// unknown symbols; entity types reserve id 0 for unknown types.
struct LabelCatalog {
  Vocabulary words;
  Vocabulary pos;
  Vocabulary entity_types;

  static constexpr std::size_t kPadId = 0;
  static constexpr std::size_t kUnkId = 1;
  static constexpr std::size_t kUnkEntityType = 0;

  std::size_t word_id(std::string_view form) const { return words.lookup(form, kUnkId); }
  std::size_t pos_id(std::string_view tag) const { return pos.lookup(tag, kUnkId); }
  std::size_t entity_type_id(std::string_view type) const {
    return entity_types.lookup(type, kUnkEntityType);
  }
  /// NONE + B/I per entity type.
  std::size_t entity_tag_count() const { return 1 + 2 * entity_types.size(); }

  /// Builds vocabularies from a training corpus; words seen fewer than
  /// `min_count` times map to unknown.
  static LabelCatalog build(const Corpus& corpus, std::size_t min_count = 1);
  static LabelCatalog empty();

  bool operator==(const LabelCatalog&) const = default;
};

}  // namespace jmee
