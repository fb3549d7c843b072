#pragma once

#include <algorithm>

namespace jmee {

template <typename TypeLookup>
std::vector<std::vector<std::size_t>> encode_entity_bio(const Sentence& sentence,
                                                        TypeLookup&& type_of) {
  std::vector<std::vector<std::size_t>> tags(sentence.size());
  for (const auto& e : sentence.entities) {
    const std::size_t type = type_of(e.type);
    for (std::size_t i = e.start; i < e.end && i < tags.size(); ++i)
      tags[i].push_back(i == e.start ? entity_begin_tag(type) : entity_inside_tag(type));
  }
  for (auto& t : tags) {
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
  }
  return tags;
}

}  // namespace jmee
