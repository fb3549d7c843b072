#include "jmee/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

namespace jmee {

namespace labels {

namespace {

constexpr std::array<std::string_view, kNumSubtypes> kSubtypes = {
    "Be-Born",        "Marry",          "Divorce",        "Injure",
    "Die",            "Transport",      "Transfer-Ownership", "Transfer-Money",
    "Start-Org",      "Merge-Org",      "Declare-Bankruptcy", "End-Org",
    "Attack",         "Demonstrate",    "Meet",           "Phone-Write",
    "Start-Position", "End-Position",   "Nominate",       "Elect",
    "Arrest-Jail",    "Release-Parole", "Trial-Hearing",  "Charge-Indict",
    "Sue",            "Convict",        "Sentence",       "Fine",
    "Execute",        "Extradite",      "Acquit",         "Appeal",
    "Pardon"};

constexpr std::array<std::string_view, kNumRoles> kRoles = {
    "OTHER",       "Person",        "Place",          "Buyer",
    "Seller",      "Beneficiary",   "Price",          "Artifact",
    "Origin",      "Destination",   "Giver",          "Recipient",
    "Money",       "Org",           "Agent",          "Victim",
    "Instrument",  "Entity",        "Attacker",       "Target",
    "Defendant",   "Adjudicator",   "Prosecutor",     "Plaintiff",
    "Crime",       "Position",      "Sentence",       "Vehicle",
    "Time-Within", "Time-Starting", "Time-Ending",    "Time-Before",
    "Time-After",  "Time-Holds",    "Time-At-Beginning", "Time-At-End",
    "Time-Arg"};

}  // namespace

std::span<const std::string_view> subtypes() { return kSubtypes; }
std::span<const std::string_view> roles() { return kRoles; }

std::optional<std::size_t> find_subtype(std::string_view name) {
  const auto it = std::find(kSubtypes.begin(), kSubtypes.end(), name);
  if (it == kSubtypes.end()) return std::nullopt;
  return static_cast<std::size_t>(it - kSubtypes.begin());
}

std::optional<std::size_t> find_role(std::string_view name) {
  const auto it = std::find(kRoles.begin(), kRoles.end(), name);
  if (it == kRoles.end()) return std::nullopt;
  return static_cast<std::size_t>(it - kRoles.begin());
}

std::size_t subtype_id(std::string_view name) {
  if (auto id = find_subtype(name)) return *id;
  throw CorpusError("unknown event subtype '" + std::string(name) + "'");
}

std::size_t role_id(std::string_view name) {
  if (auto id = find_role(name)) return *id;
  throw CorpusError("unknown argument role '" + std::string(name) + "'");
}

std::string tag_name(std::size_t tag) {
  if (tag == kOutsideTag) return "O";
  if (tag >= kNumTriggerTags) return "?";
  return std::string(is_begin(tag) ? "B-" : "I-") + std::string(kSubtypes[tag_subtype(tag)]);
}

}  // namespace labels

std::string_view edge_label_name(EdgeLabel label) {
  switch (label) {
    case EdgeLabel::along: return "along";
    case EdgeLabel::rev: return "rev";
    case EdgeLabel::loop: return "loop";
  }
  return "?";
}

TypedGraph build_typed_graph(const Sentence& sentence) {
  TypedGraph g;
  g.n = sentence.size();
  g.edges.reserve(3 * g.n);
  for (std::size_t dep = 0; dep < g.n; ++dep) {
    const int head = sentence.tokens[dep].head;
    if (head == kRootHead) continue;
    const auto h = static_cast<std::size_t>(head);
    g.edges.push_back({h, dep, EdgeLabel::along});
    g.edges.push_back({dep, h, EdgeLabel::rev});
  }
  for (std::size_t v = 0; v < g.n; ++v) g.edges.push_back({v, v, EdgeLabel::loop});
  return g;
}

TypedGraph loop_only_graph(std::size_t n) {
  TypedGraph g;
  g.n = n;
  for (std::size_t v = 0; v < n; ++v) g.edges.push_back({v, v, EdgeLabel::loop});
  return g;
}

// ---------------------------------------------------------------------------

void validate(const Sentence& s) {
  const std::size_t n = s.size();
  if (n == 0) throw CorpusError("tokens: sentence has no tokens");
  for (std::size_t i = 0; i < n; ++i) {
    const Token& t = s.tokens[i];
    const std::string where = "tokens[" + std::to_string(i) + "]";
    if (t.form.empty()) throw CorpusError(where + ".form: empty");
    if (t.head != kRootHead && (t.head < 0 || static_cast<std::size_t>(t.head) >= n))
      throw CorpusError(where + ".head: " + std::to_string(t.head) + " out of range");
    if (t.head == static_cast<int>(i)) throw CorpusError(where + ".head: token is its own head");
  }
  // Every head chain must reach ROOT within n steps.
  for (std::size_t i = 0; i < n; ++i) {
    int cur = static_cast<int>(i);
    std::size_t steps = 0;
    while (cur != kRootHead) {
      cur = s.tokens[static_cast<std::size_t>(cur)].head;
      if (++steps > n)
        throw CorpusError("tokens[" + std::to_string(i) + "].head: cycle in dependency arcs");
    }
  }
  for (std::size_t e = 0; e < s.entities.size(); ++e) {
    const auto& m = s.entities[e];
    if (m.start >= m.end || m.end > n)
      throw CorpusError("entities[" + std::to_string(e) + "]: span [" + std::to_string(m.start) +
                        ", " + std::to_string(m.end) + ") invalid for " + std::to_string(n) +
                        " tokens");
    if (m.type.empty()) throw CorpusError("entities[" + std::to_string(e) + "].type: empty");
  }
  for (std::size_t v = 0; v < s.events.size(); ++v) {
    const auto& ev = s.events[v];
    const std::string where = "events[" + std::to_string(v) + "]";
    if (ev.trigger_start >= ev.trigger_end || ev.trigger_end > n)
      throw CorpusError(where + ".trigger: span [" + std::to_string(ev.trigger_start) + ", " +
                        std::to_string(ev.trigger_end) + ") invalid");
    if (ev.subtype >= labels::kNumSubtypes)
      throw CorpusError(where + ".subtype: id " + std::to_string(ev.subtype) + " out of range");
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t a = 0; a < ev.arguments.size(); ++a) {
      const auto& arg = ev.arguments[a];
      const std::string aw = where + ".args[" + std::to_string(a) + "]";
      if (arg.entity >= s.entities.size())
        throw CorpusError(aw + ".entity: index " + std::to_string(arg.entity) + " out of range");
      if (arg.role == labels::kOtherRole || arg.role >= labels::kNumRoles)
        throw CorpusError(aw + ".role: id " + std::to_string(arg.role) + " invalid");
      if (!seen.insert({arg.entity, arg.role}).second)
        throw CorpusError(aw + ": duplicate (entity, role) pair");
    }
  }
}

namespace {

using json = nlohmann::ordered_json;

template <typename T>
T get_field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw CorpusError(where + "." + key + ": missing");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw CorpusError(where + "." + key + ": wrong type");
  }
}

const json& get_array(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw CorpusError(where + key + ": missing");
  const json& a = obj.at(key);
  if (!a.is_array()) throw CorpusError(where + key + ": expected a list");
  return a;
}

}  // namespace

Sentence parse_sentence(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw CorpusError(std::string("malformed record: ") + e.what());
  }
  if (!j.is_object()) throw CorpusError("record is not an object");
  Sentence s;
  const json& toks = get_array(j, "tokens", "");
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const std::string w = "tokens[" + std::to_string(i) + "]";
    Token t;
    t.form = get_field<std::string>(toks[i], "form", w);
    t.pos = get_field<std::string>(toks[i], "pos", w);
    t.head = get_field<int>(toks[i], "head", w);
    t.deprel = get_field<std::string>(toks[i], "deprel", w);
    s.tokens.push_back(std::move(t));
  }
  const json& ents = get_array(j, "entities", "");
  for (std::size_t i = 0; i < ents.size(); ++i) {
    const std::string w = "entities[" + std::to_string(i) + "]";
    EntityMention m;
    m.start = get_field<std::size_t>(ents[i], "start", w);
    m.end = get_field<std::size_t>(ents[i], "end", w);
    m.type = get_field<std::string>(ents[i], "type", w);
    s.entities.push_back(std::move(m));
  }
  const json& evs = get_array(j, "events", "");
  for (std::size_t i = 0; i < evs.size(); ++i) {
    const std::string w = "events[" + std::to_string(i) + "]";
    EventMention ev;
    if (!evs[i].is_object() || !evs[i].contains("trigger"))
      throw CorpusError(w + ".trigger: missing");
    ev.trigger_start = get_field<std::size_t>(evs[i]["trigger"], "start", w + ".trigger");
    ev.trigger_end = get_field<std::size_t>(evs[i]["trigger"], "end", w + ".trigger");
    const auto subtype = get_field<std::string>(evs[i], "subtype", w);
    const auto sid = labels::find_subtype(subtype);
    if (!sid) throw CorpusError(w + ".subtype: unknown subtype '" + subtype + "'");
    ev.subtype = *sid;
    const json& args = get_array(evs[i], "args", w + ".");
    for (std::size_t a = 0; a < args.size(); ++a) {
      const std::string aw = w + ".args[" + std::to_string(a) + "]";
      Argument arg;
      arg.entity = get_field<std::size_t>(args[a], "entity", aw);
      const auto role = get_field<std::string>(args[a], "role", aw);
      const auto rid = labels::find_role(role);
      if (!rid) throw CorpusError(aw + ".role: unknown role '" + role + "'");
      arg.role = *rid;
      ev.arguments.push_back(arg);
    }
    s.events.push_back(std::move(ev));
  }
  validate(s);
  return s;
}

std::string serialize_sentence(const Sentence& s) {
  json j;
  j["tokens"] = json::array();
  for (const auto& t : s.tokens)
    j["tokens"].push_back({{"form", t.form}, {"pos", t.pos}, {"head", t.head}, {"deprel", t.deprel}});
  j["entities"] = json::array();
  for (const auto& e : s.entities)
    j["entities"].push_back({{"start", e.start}, {"end", e.end}, {"type", e.type}});
  j["events"] = json::array();
  for (const auto& ev : s.events) {
    json args = json::array();
    for (const auto& a : ev.arguments)
      args.push_back({{"entity", a.entity}, {"role", std::string(labels::roles()[a.role])}});
    j["events"].push_back({{"trigger", {{"start", ev.trigger_start}, {"end", ev.trigger_end}}},
                           {"subtype", std::string(labels::subtypes()[ev.subtype])},
                           {"args", std::move(args)}});
  }
  return j.dump();
}

Corpus read_corpus(std::string_view text) {
  Corpus corpus;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    try {
      corpus.push_back(parse_sentence(line));
    } catch (const CorpusError& e) {
      throw CorpusError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open corpus file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return read_corpus(buf.str());
  } catch (const CorpusError& e) {
    throw CorpusError(path.string() + ": " + e.what());
  }
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write corpus file " + path.string());
  for (const auto& s : corpus) out << serialize_sentence(s) << '\n';
  if (!out) throw CorpusError("write failed for " + path.string());
}

Sentence truncate(const Sentence& s, std::size_t max_len) {
  if (s.size() <= max_len) return s;
  Sentence out;
  out.tokens.assign(s.tokens.begin(), s.tokens.begin() + static_cast<std::ptrdiff_t>(max_len));
  for (auto& t : out.tokens)
    if (t.head != kRootHead && static_cast<std::size_t>(t.head) >= max_len) t.head = kRootHead;
  std::vector<std::optional<std::size_t>> remap(s.entities.size());
  for (std::size_t e = 0; e < s.entities.size(); ++e) {
    if (s.entities[e].end <= max_len) {
      remap[e] = out.entities.size();
      out.entities.push_back(s.entities[e]);
    }
  }
  for (const auto& ev : s.events) {
    if (ev.trigger_end > max_len) continue;
    EventMention kept = ev;
    kept.arguments.clear();
    for (const auto& a : ev.arguments)
      if (remap[a.entity]) kept.arguments.push_back({*remap[a.entity], a.role});
    out.events.push_back(std::move(kept));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> encode_trigger_bio(const Sentence& s) {
  std::vector<std::size_t> tags(s.size(), labels::kOutsideTag);
  for (std::size_t v = 0; v < s.events.size(); ++v) {
    const auto& ev = s.events[v];
    for (std::size_t i = ev.trigger_start; i < ev.trigger_end; ++i) {
      if (tags[i] != labels::kOutsideTag)
        throw CorpusError("events[" + std::to_string(v) + "].trigger: overlaps another trigger at token " +
                          std::to_string(i));
      tags[i] = i == ev.trigger_start ? labels::begin_tag(ev.subtype) : labels::inside_tag(ev.subtype);
    }
  }
  return tags;
}

std::vector<TriggerSpan> decode_trigger_spans(std::span<const std::size_t> tags) {
  std::vector<TriggerSpan> spans;
  std::optional<TriggerSpan> open;
  auto close = [&](std::size_t end) {
    if (open) {
      open->end = end;
      spans.push_back(*open);
      open.reset();
    }
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::size_t tag = tags[i];
    if (tag == labels::kOutsideTag || tag >= labels::kNumTriggerTags) {
      close(i);
    } else if (labels::is_begin(tag)) {
      close(i);
      open = TriggerSpan{i, 0, labels::tag_subtype(tag)};
    } else if (!open || open->subtype != labels::tag_subtype(tag)) {
      close(i);
      open = TriggerSpan{i, 0, labels::tag_subtype(tag)};
    }
  }
  close(tags.size());
  return spans;
}

std::vector<TriggerSpan> gold_trigger_spans(const Sentence& s) {
  std::vector<TriggerSpan> out;
  for (const auto& ev : s.events) out.push_back({ev.trigger_start, ev.trigger_end, ev.subtype});
  return out;
}

SentenceSplit split_1v1_1vN(const Corpus& corpus) {
  SentenceSplit split;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::size_t k = corpus[i].events.size();
    if (k == 1) split.single.push_back(i);
    else if (k >= 2) split.multiple.push_back(i);
  }
  return split;
}

}  // namespace jmee
