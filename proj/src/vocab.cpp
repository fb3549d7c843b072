#include "jmee/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

namespace jmee {

Vocabulary::Vocabulary(std::vector<std::string> symbols) {
  for (auto& s : symbols) add(s);
}

std::size_t Vocabulary::add(std::string_view symbol) {
  std::string key(symbol);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  const std::size_t id = symbols_.size();
  index_.emplace(key, id);
  symbols_.push_back(std::move(key));
  return id;
}

std::optional<std::size_t> Vocabulary::find(std::string_view symbol) const {
  if (auto it = index_.find(std::string(symbol)); it != index_.end()) return it->second;
  return std::nullopt;
}

std::size_t Vocabulary::lookup(std::string_view symbol, std::size_t fallback) const {
  return find(symbol).value_or(fallback);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file " + path.string());
  Vocabulary v;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (v.find(line))
      throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) +
                               ": duplicate symbol '" + line + "'");
    v.add(line);
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary file " + path.string());
  for (const auto& s : symbols_) out << s << '\n';
}

LabelCatalog LabelCatalog::empty() {
  LabelCatalog c;
  c.words.add(kPadSymbol);
  c.words.add(kUnkSymbol);
  c.pos.add(kPadSymbol);
  c.pos.add(kUnkSymbol);
  c.entity_types.add(kUnkSymbol);
  return c;
}

LabelCatalog LabelCatalog::build(const Corpus& corpus, std::size_t min_count) {
  LabelCatalog c = empty();
  // Ordered maps keep ids independent of hash iteration order.
  std::map<std::string, std::size_t> word_counts;
  std::map<std::string, std::size_t> first_seen;
  std::size_t order = 0;
  for (const auto& s : corpus) {
    for (const auto& t : s.tokens) {
      ++word_counts[t.form];
      first_seen.emplace(t.form, order++);
      c.pos.add(t.pos);
    }
    for (const auto& e : s.entities) c.entity_types.add(e.type);
  }
  std::vector<std::pair<std::size_t, std::string>> kept;
  for (const auto& [w, n] : word_counts)
    if (n >= min_count) kept.emplace_back(first_seen[w], w);
  std::sort(kept.begin(), kept.end());
  for (const auto& [_, w] : kept) c.words.add(w);
  return c;
}

}  // namespace jmee
