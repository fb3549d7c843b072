#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace jmee {

/// Malformed or invariant-violating corpus data.
class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kRootHead = -1;

struct Token {
  std::string form;
  std::string pos;
  int head = kRootHead;  // parent token index, or kRootHead
  std::string deprel;

  bool operator==(const Token&) const = default;
};

struct EntityMention {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  std::string type;

  bool operator==(const EntityMention&) const = default;
};

struct Argument {
  std::size_t entity = 0;  // index into Sentence::entities
  std::size_t role = 0;    // role id, never labels::kOtherRole

  bool operator==(const Argument&) const = default;
};

struct EventMention {
  std::size_t trigger_start = 0;
  std::size_t trigger_end = 0;
  std::size_t subtype = 0;
  std::vector<Argument> arguments;

  bool operator==(const EventMention&) const = default;
};

struct Sentence {
  std::vector<Token> tokens;
  std::vector<EntityMention> entities;
  std::vector<EventMention> events;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const Sentence&) const = default;
};

using Corpus = std::vector<Sentence>;

/// Fixed event-label spaces: 33 subtypes, 67 BIO trigger tags, 36 roles plus
/// OTHER.
namespace labels {

inline constexpr std::size_t kNumSubtypes = 33;
inline constexpr std::size_t kNumTriggerTags = 2 * kNumSubtypes + 1;
inline constexpr std::size_t kNumRoles = 37;
inline constexpr std::size_t kOutsideTag = 0;
inline constexpr std::size_t kOtherRole = 0;

std::span<const std::string_view> subtypes();
std::span<const std::string_view> roles();

std::optional<std::size_t> find_subtype(std::string_view name);
std::optional<std::size_t> find_role(std::string_view name);
std::size_t subtype_id(std::string_view name);  // throws CorpusError
std::size_t role_id(std::string_view name);     // throws CorpusError

inline constexpr std::size_t begin_tag(std::size_t subtype) { return 1 + 2 * subtype; }
inline constexpr std::size_t inside_tag(std::size_t subtype) { return 2 + 2 * subtype; }
inline constexpr bool is_begin(std::size_t tag) { return tag != kOutsideTag && tag % 2 == 1; }
inline constexpr bool is_inside(std::size_t tag) { return tag != kOutsideTag && tag % 2 == 0; }
inline constexpr std::size_t tag_subtype(std::size_t tag) { return (tag - 1) / 2; }
std::string tag_name(std::size_t tag);

}  // namespace labels

// ---------------------------------------------------------------------------
// Typed syntactic graph

enum class EdgeLabel : std::uint8_t { along = 0, rev = 1, loop = 2 };
inline constexpr std::size_t kNumEdgeLabels = 3;
std::string_view edge_label_name(EdgeLabel label);

struct Edge {
  std::size_t source = 0;
  std::size_t target = 0;
  EdgeLabel label = EdgeLabel::loop;

  bool operator==(const Edge&) const = default;
};

struct TypedGraph {
  std::size_t n = 0;
  std::vector<Edge> edges;
};

/// One `along` edge head->dep and one `rev` edge dep->head per dependency
/// arc, plus a `loop` edge per token. Arcs to ROOT produce no edge.
TypedGraph build_typed_graph(const Sentence& sentence);

/// Graph with self loops only, e.g. for padding positions.
TypedGraph loop_only_graph(std::size_t n);

// ---------------------------------------------------------------------------
// Validation and I/O

/// Throws CorpusError naming the offending field path.
void validate(const Sentence& sentence);

Sentence parse_sentence(std::string_view json_line);
std::string serialize_sentence(const Sentence& sentence);

/// One JSON record per line; blank lines are skipped. Errors carry the line
/// number.
Corpus load_corpus(const std::filesystem::path& path);
Corpus read_corpus(std::string_view text);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

/// Keeps the first `max_len` tokens. Arcs to dropped tokens become ROOT
/// attachments; entities and events not wholly inside the prefix are dropped
/// (argument indices are remapped).
Sentence truncate(const Sentence& sentence, std::size_t max_len);

// ---------------------------------------------------------------------------
// BIO codecs

struct TriggerSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t subtype = 0;

  bool operator==(const TriggerSpan&) const = default;
  auto operator<=>(const TriggerSpan&) const = default;
};

/// Per-token trigger tag ids. Throws CorpusError on overlapping triggers.
std::vector<std::size_t> encode_trigger_bio(const Sentence& sentence);

/// Total decoder: a span closes at O, at a B-, at an I- of another subtype,
/// or at the end; an orphan I- opens a new span.
std::vector<TriggerSpan> decode_trigger_spans(std::span<const std::size_t> tags);

std::vector<TriggerSpan> gold_trigger_spans(const Sentence& sentence);

/// Entity BIO tag ids for a type vocabulary of `num_types` entries:
/// 0 is the NONE tag, B-type = 1 + 2t, I-type = 2 + 2t.
inline constexpr std::size_t kEntityNoneTag = 0;
inline constexpr std::size_t entity_begin_tag(std::size_t type) { return 1 + 2 * type; }
inline constexpr std::size_t entity_inside_tag(std::size_t type) { return 2 + 2 * type; }

/// Per-token sorted set of entity tags induced by every (possibly
/// overlapping) mention. `type_of` maps a mention's type string to its id.
template <typename TypeLookup>
std::vector<std::vector<std::size_t>> encode_entity_bio(const Sentence& sentence,
                                                        TypeLookup&& type_of);

// ---------------------------------------------------------------------------
// 1/1 versus 1/N partition

struct SentenceSplit {
  std::vector<std::size_t> single;    // indices of sentences with one trigger
  std::vector<std::size_t> multiple;  // indices with two or more
};

SentenceSplit split_1v1_1vN(const Corpus& corpus);

}  // namespace jmee

#include "jmee/detail/entity_bio.ipp"
