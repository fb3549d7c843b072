#include "jmee/synthetic.hpp"

#include <algorithm>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace jmee {

namespace {

constexpr std::size_t K = labels::kNumSubtypes;

std::size_t sid(std::string_view name) { return labels::subtype_id(name); }

// Subtypes sharing trigger words. Hub pairs use the cue polarity directly,
// partner pairs use it crossed.
struct WordGroup {
  std::vector<std::string_view> senses;  // one or two subtypes
  std::vector<std::string_view> words;
  bool crossed = false;
};

const std::vector<WordGroup>& word_groups() {
  static const std::vector<WordGroup> groups = {
      {{"Attack", "Meet"}, {"clashed", "engaged", "confronted"}, false},
      {{"Transport", "Die"}, {"passed", "departed", "went"}, false},
      {{"Arrest-Jail", "Elect"}, {"held", "took", "picked"}, false},
      {{"Injure", "Phone-Write"}, {"reached", "touched"}, true},
      {{"Demonstrate", "Transfer-Money"}, {"rallied", "raised"}, true},
      {{"Execute", "Start-Org"}, {"settled", "founded"}, true},
      {{"End-Org", "Merge-Org"}, {"joined", "folded"}, true},
      {{"Transfer-Ownership", "Nominate"}, {"backed", "named"}, true},
      {{"Extradite", "Be-Born"}, {"brought", "delivered"}, true},
      {{"Release-Parole", "Marry"}, {"freed", "bound"}, true},
      {{"Start-Position", "Divorce"}, {"placed", "split"}, true},
      {{"End-Position", "Sue"}, {"dropped", "filed"}, true},
      {{"Charge-Indict", "Acquit"}, {"charged", "cleared"}, true},
      {{"Trial-Hearing", "Appeal"}, {"heard", "challenged"}, true},
      {{"Convict", "Pardon"}, {"judged", "spared"}, true},
      {{"Sentence", "Declare-Bankruptcy"}, {"sentenced", "declared"}, true},
      {{"Fine"}, {"fined", "penalized"}, false},
  };
  return groups;
}

struct SenseWords {
  std::size_t group = 0;
  std::size_t sense = 0;
};

const std::array<SenseWords, K>& sense_table() {
  static const std::array<SenseWords, K> table = [] {
    std::array<SenseWords, K> t{};
    std::array<bool, K> seen{};
    const auto& groups = word_groups();
    for (std::size_t g = 0; g < groups.size(); ++g)
      for (std::size_t s = 0; s < groups[g].senses.size(); ++s) {
        const std::size_t id = sid(groups[g].senses[s]);
        t[id] = {g, s};
        seen[id] = true;
      }
    for (bool b : seen)
      if (!b) throw std::logic_error("synthetic grammar misses a subtype");
    return t;
  }();
  return table;
}

constexpr std::array<std::array<std::string_view, 2>, 2> kCues = {{{"reportedly", "apparently"},
                                                                    {"allegedly", "openly"}}};
constexpr std::array<std::string_view, 3> kParticles = {"up", "out", "off"};

enum class Slot { subj, obj, place, time, extra };
constexpr std::array<Slot, 5> kSlots = {Slot::subj, Slot::obj, Slot::place, Slot::time, Slot::extra};

struct Frame {
  std::string_view subtype, subj, obj, extra, place = "Place";
};

const std::vector<Frame>& frames() {
  static const std::vector<Frame> f = {
      {"Be-Born", "Person", "", ""},
      {"Marry", "Person", "Person", ""},
      {"Divorce", "Person", "Person", ""},
      {"Injure", "Agent", "Victim", "Instrument"},
      {"Die", "Agent", "Victim", "Instrument"},
      {"Transport", "Agent", "Artifact", "Vehicle", "Destination"},
      {"Transfer-Ownership", "Buyer", "Artifact", "Seller"},
      {"Transfer-Money", "Giver", "Money", "Recipient"},
      {"Start-Org", "Agent", "Org", ""},
      {"Merge-Org", "Org", "Org", ""},
      {"Declare-Bankruptcy", "Org", "", ""},
      {"End-Org", "Org", "", ""},
      {"Attack", "Attacker", "Target", "Instrument"},
      {"Demonstrate", "Entity", "", ""},
      {"Meet", "Entity", "Entity", ""},
      {"Phone-Write", "Entity", "Entity", ""},
      {"Start-Position", "Person", "Entity", ""},
      {"End-Position", "Person", "Entity", ""},
      {"Nominate", "Agent", "Person", ""},
      {"Elect", "Entity", "Person", ""},
      {"Arrest-Jail", "Agent", "Person", "Crime"},
      {"Release-Parole", "Entity", "Person", "Crime"},
      {"Trial-Hearing", "Prosecutor", "Defendant", "Adjudicator"},
      {"Charge-Indict", "Prosecutor", "Defendant", "Crime"},
      {"Sue", "Plaintiff", "Defendant", "Adjudicator"},
      {"Convict", "Adjudicator", "Defendant", "Crime"},
      {"Sentence", "Adjudicator", "Defendant", "Crime"},
      {"Fine", "Adjudicator", "Entity", "Money"},
      {"Execute", "Agent", "Person", "Crime"},
      {"Extradite", "Agent", "Person", "Origin", "Destination"},
      {"Acquit", "Adjudicator", "Defendant", "Crime"},
      {"Appeal", "Plaintiff", "Adjudicator", ""},
      {"Pardon", "Adjudicator", "Defendant", "Crime"},
  };
  return f;
}

const Frame& frame_of(std::size_t subtype) {
  for (const auto& f : frames())
    if (sid(f.subtype) == subtype) return f;
  throw std::logic_error("no frame for subtype");
}

std::string_view role_for(const Frame& f, Slot slot) {
  switch (slot) {
    case Slot::subj: return f.subj;
    case Slot::obj: return f.obj;
    case Slot::place: return f.place;
    case Slot::time: return "Time-Within";
    case Slot::extra: return f.extra;
  }
  return "";
}

std::vector<std::string_view> entity_types_for(std::string_view role) {
  if (role == "Org") return {"ORG"};
  if (role == "Artifact") return {"VEH", "WEA"};
  if (role == "Money") return {"MONEY"};
  if (role == "Crime") return {"CRIME"};
  if (role == "Instrument") return {"WEA"};
  if (role == "Vehicle") return {"VEH"};
  if (role == "Place" || role == "Destination" || role == "Origin") return {"GPE", "LOC"};
  if (role == "Time-Within") return {"TIME"};
  if (role == "Person" || role == "Victim" || role == "Defendant") return {"PER"};
  if (role == "Entity") return {"PER", "ORG", "GPE"};
  return {"PER", "ORG"};
}

struct Lexeme {
  std::string_view type;
  std::vector<std::string_view> heads;
  std::vector<std::string_view> modifiers;
};

const std::vector<Lexeme>& lexicon() {
  static const std::vector<Lexeme> l = {
      {"PER", {"soldiers", "protesters", "officials", "police", "villagers", "Ahmed", "Maria", "witnesses"},
       {"local", "young", "senior"}},
      {"ORG", {"army", "company", "ministry", "union", "court", "bank"}, {"state", "rebel", "national"}},
      {"GPE", {"Baghdad", "Paris", "Kabul", "Texas", "Lagos"}, {"northern", "central"}},
      {"LOC", {"border", "river", "valley", "coast"}, {"eastern", "southern"}},
      {"TIME", {"Friday", "Monday", "yesterday", "March", "dawn"}, {"last", "early"}},
      {"WEA", {"rockets", "rifles", "bombs", "mortars"}, {"heavy", "old"}},
      {"VEH", {"trucks", "planes", "boats", "buses"}, {"cargo", "military"}},
      {"MONEY", {"dollars", "funds", "euros"}, {"million", "public"}},
      {"CRIME", {"fraud", "murder", "theft", "bribery"}, {"alleged", "tax"}},
  };
  return l;
}

const Lexeme& lexeme(std::string_view type) {
  for (const auto& x : lexicon())
    if (x.type == type) return x;
  throw std::logic_error("no lexeme for entity type");
}

struct Filler {
  std::string_view form, pos, deprel;
};
constexpr std::array<Filler, 8> kFillers = {{{"also", "RB", "advmod"},
                                             {"then", "RB", "advmod"},
                                             {"later", "RB", "advmod"},
                                             {"there", "RB", "advmod"},
                                             {"that", "DT", "det"},
                                             {"the", "DT", "det"},
                                             {"which", "WDT", "dep"},
                                             {"news", "NN", "dep"}}};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
  bool chance(double p) { return uniform() < p; }
  template <typename T>
  const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }
  template <typename T, std::size_t N>
  const T& pick(const std::array<T, N>& v) { return v[below(N)]; }
  std::size_t weighted(std::span<const double> w) {
    double total = 0.0;
    for (double x : w) total += x;
    double u = uniform() * total;
    std::size_t last = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] <= 0.0) continue;
      last = i;
      if (u < w[i]) return i;
      u -= w[i];
    }
    return last;
  }

 private:
  std::mt19937_64 engine_;
};

// Dependency tree under construction. Children carry a side preference;
// `before`/`after` children are glued to the head (case markers, compounds,
// particles) so that entity and trigger spans stay contiguous.
struct Node {
  std::string form, pos, deprel;
  int parent = -1;
  std::vector<int> children;
  std::vector<int> before, after;
  int side = 0;  // -1 left of parent, +1 right, 0 either
  bool rightmost = false;
  bool outermost = false;  // farthest from the head on its side
};

class TreeBuilder {
 public:
  explicit TreeBuilder(Rng& rng) : rng_(rng) {}

  int add(std::string_view form, std::string_view pos, std::string_view deprel, int parent, int side = 0) {
    nodes_.push_back({std::string(form), std::string(pos), std::string(deprel), parent, {}, {}, {}, side, false, false});
    const int id = static_cast<int>(nodes_.size()) - 1;
    if (parent >= 0) nodes_[static_cast<std::size_t>(parent)].children.push_back(id);
    return id;
  }
  int glue_before(std::string_view form, std::string_view pos, std::string_view deprel, int head) {
    nodes_.push_back({std::string(form), std::string(pos), std::string(deprel), head, {}, {}, {}, 0, false, false});
    const int id = static_cast<int>(nodes_.size()) - 1;
    nodes_[static_cast<std::size_t>(head)].before.push_back(id);
    return id;
  }
  int glue_after(std::string_view form, std::string_view pos, std::string_view deprel, int head) {
    nodes_.push_back({std::string(form), std::string(pos), std::string(deprel), head, {}, {}, {}, 0, false, false});
    const int id = static_cast<int>(nodes_.size()) - 1;
    nodes_[static_cast<std::size_t>(head)].after.push_back(id);
    return id;
  }
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

  /// In-order linearization; returns position per node.
  std::vector<std::size_t> linearize(int root) {
    order_.clear();
    visit(root);
    std::vector<std::size_t> pos(nodes_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) pos[static_cast<std::size_t>(order_[i])] = i;
    return pos;
  }

 private:
  void visit(int id) {
    Node& n = node(id);
    std::vector<int> left, right;
    int last = -1;
    for (int c : n.children) {
      const Node& ch = node(c);
      if (ch.rightmost) {
        last = c;
        continue;
      }
      const int side = ch.side != 0 ? ch.side : (rng_.chance(0.5) ? -1 : 1);
      (side < 0 ? left : right).push_back(c);
    }
    shuffle(left);
    shuffle(right);
    auto outer = [&](int c) { return node(c).outermost; };
    std::stable_partition(left.begin(), left.end(), outer);
    std::stable_partition(right.begin(), right.end(), [&](int c) { return !outer(c); });
    for (int c : left) visit(c);
    for (int c : n.before) order_.push_back(c);
    order_.push_back(id);
    for (int c : n.after) order_.push_back(c);
    for (int c : right) visit(c);
    if (last >= 0) visit(last);
  }
  void shuffle(std::vector<int>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng_.below(i)]);
  }

  Rng& rng_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
};

struct PlannedEvent {
  std::size_t subtype = 0;
  int trigger = -1;
  int particle = -1;
  std::vector<Slot> free_slots;
};

struct PlannedEntity {
  int head = -1;
  int modifier = -1;
  std::string type;
  std::optional<std::size_t> event;
  std::string_view role;
};

Sentence generate_sentence(Rng& rng, const SyntheticOptions& opt) {
  std::vector<std::size_t> subtypes{rng.weighted(opt.hub_prior)};
  if (rng.chance(opt.multi_event_rate)) {
    subtypes.push_back(rng.weighted(opt.partner_weight[subtypes[0]]));
    if (rng.chance(opt.third_event_rate)) subtypes.push_back(subtypes[0]);
  }

  TreeBuilder tree(rng);
  std::vector<PlannedEvent> events;
  std::vector<int> anchors;  // nodes later events may attach to
  for (std::size_t k = 0; k < subtypes.size(); ++k) {
    const std::size_t st = subtypes[k];
    const SenseWords sw = sense_table()[st];
    const WordGroup& group = word_groups()[sw.group];
    int parent = -1;
    std::string_view deprel = "ROOT";
    if (k > 0) {
      parent = anchors[rng.below(anchors.size())];
      static const std::vector<std::string_view> kLinks = {"ccomp", "advcl", "conj", "acl"};
      deprel = tree.node(parent).pos == "VBD" ? rng.pick(kLinks) : std::string_view("acl");
    }
    PlannedEvent ev;
    ev.subtype = st;
    ev.trigger = tree.add(rng.pick(group.words), "VBD", deprel, parent);
    if (rng.chance(opt.particle_rate)) ev.particle = tree.glue_after(rng.pick(kParticles), "RP", "compound:prt", ev.trigger);
    const std::size_t cue_class =
        group.senses.size() == 1 ? rng.below(2) : (group.crossed ? 1 - sw.sense : sw.sense);
    // The cue sits at the edge of the trigger's phrase, so argument and
    // nested clause material separates the two in the word order.
    const int cue = tree.add(rng.pick(kCues[cue_class]), "RB", "advmod", ev.trigger);
    tree.node(cue).outermost = true;

    const Frame& f = frame_of(st);
    for (Slot s : kSlots)
      if (!role_for(f, s).empty()) ev.free_slots.push_back(s);
    anchors.push_back(ev.trigger);
    events.push_back(std::move(ev));
  }

  const std::size_t entity_count = 1 + rng.below(4);
  std::vector<PlannedEntity> entities;
  for (std::size_t e = 0; e < entity_count; ++e) {
    PlannedEntity pe;
    std::optional<std::size_t> target;
    if (!rng.chance(0.15)) target = rng.below(events.size());
    Slot slot = Slot::subj;
    if (target && !events[*target].free_slots.empty()) {
      auto& free = events[*target].free_slots;
      const std::size_t pick = rng.below(free.size());
      slot = free[pick];
      free.erase(free.begin() + static_cast<std::ptrdiff_t>(pick));
      pe.event = target;
      pe.role = role_for(frame_of(events[*target].subtype), slot);
      pe.type = std::string(rng.pick(entity_types_for(pe.role)));
    } else {
      static const std::vector<std::string_view> kAny = {"PER", "ORG", "GPE", "LOC", "TIME"};
      pe.type = std::string(rng.pick(kAny));
    }
    const Lexeme& lx = lexeme(pe.type);
    if (pe.event) {
      const int trig = events[*pe.event].trigger;
      switch (slot) {
        case Slot::subj: pe.head = tree.add(rng.pick(lx.heads), "NNS", "nsubj", trig, -1); break;
        case Slot::obj: pe.head = tree.add(rng.pick(lx.heads), "NNS", "obj", trig, +1); break;
        case Slot::place:
          pe.head = tree.add(rng.pick(lx.heads), "NNP", "obl", trig, +1);
          tree.glue_before("in", "IN", "case", pe.head);
          break;
        case Slot::time:
          pe.head = tree.add(rng.pick(lx.heads), "NNP", "obl:tmod", trig, 0);
          tree.glue_before("on", "IN", "case", pe.head);
          break;
        case Slot::extra:
          pe.head = tree.add(rng.pick(lx.heads), "NN", "obl", trig, +1);
          tree.glue_before("with", "IN", "case", pe.head);
          break;
      }
    } else {
      static const std::vector<std::string_view> kCases = {"near", "after", "despite"};
      const int parent = static_cast<int>(rng.below(tree.size()));
      const int at = tree.node(parent).pos == "VBD" || tree.node(parent).pos.starts_with("NN") ? parent
                                                                                                 : events[0].trigger;
      pe.head = tree.add(rng.pick(lx.heads), "NN", "nmod", at, 0);
      tree.glue_before(rng.pick(kCases), "IN", "case", pe.head);
    }
    if (rng.chance(0.3)) pe.modifier = tree.glue_before(rng.pick(lx.modifiers), "JJ", "amod", pe.head);
    anchors.push_back(pe.head);
    entities.push_back(std::move(pe));
  }

  // Adverbial cues on non-trigger words make the bag of cues uninformative.
  for (const auto& e : entities)
    if (rng.chance(opt.distractor_cue_rate)) tree.add(rng.pick(kCues[rng.below(2)]), "RB", "advmod", e.head);
  const std::size_t fillers = rng.below(4);
  for (std::size_t f = 0; f < fillers; ++f) {
    const Filler& fl = rng.pick(kFillers);
    tree.add(fl.form, fl.pos, fl.deprel, anchors[rng.below(anchors.size())]);
  }
  const int punct = tree.add(".", ".", "punct", events[0].trigger, +1);
  tree.node(punct).rightmost = true;

  const std::vector<std::size_t> pos = tree.linearize(events[0].trigger);
  Sentence s;
  s.tokens.resize(tree.size());
  for (std::size_t id = 0; id < tree.size(); ++id) {
    const Node& n = tree.node(static_cast<int>(id));
    s.tokens[pos[id]] = {n.form, n.pos, n.parent < 0 ? kRootHead : static_cast<int>(pos[static_cast<std::size_t>(n.parent)]),
                         n.deprel};
  }
  std::vector<std::size_t> entity_index(entities.size());
  for (std::size_t e = 0; e < entities.size(); ++e) {
    const auto& pe = entities[e];
    const std::size_t end = pos[static_cast<std::size_t>(pe.head)] + 1;
    const std::size_t start = pe.modifier >= 0 ? pos[static_cast<std::size_t>(pe.modifier)] : end - 1;
    entity_index[e] = s.entities.size();
    s.entities.push_back({start, end, pe.type});
  }
  for (std::size_t k = 0; k < events.size(); ++k) {
    const auto& ev = events[k];
    const std::size_t start = pos[static_cast<std::size_t>(ev.trigger)];
    EventMention m{start, start + (ev.particle >= 0 ? 2 : 1), ev.subtype, {}};
    for (std::size_t e = 0; e < entities.size(); ++e)
      if (entities[e].event == k) m.arguments.push_back({entity_index[e], labels::role_id(entities[e].role)});
    s.events.push_back(std::move(m));
  }
  validate(s);
  return s;
}

}  // namespace

SyntheticOptions SyntheticOptions::defaults(double multi_event_rate) {
  SyntheticOptions o;
  o.multi_event_rate = multi_event_rate;
  const std::vector<std::pair<std::string_view, std::vector<std::string_view>>> table = {
      {"Attack", {"Injure", "Demonstrate", "Execute", "End-Org", "Transfer-Ownership", "Die", "Transport"}},
      {"Meet", {"Phone-Write", "Transfer-Money", "Start-Org", "Merge-Org", "Nominate", "Attack", "Transport"}},
      {"Transport", {"Extradite", "Release-Parole", "Start-Position", "End-Position", "Die", "Arrest-Jail"}},
      {"Die", {"Be-Born", "Marry", "Divorce", "Sue", "Attack"}},
      {"Arrest-Jail", {"Charge-Indict", "Trial-Hearing", "Convict", "Sentence", "Fine", "Attack"}},
      {"Elect", {"Acquit", "Appeal", "Pardon", "Declare-Bankruptcy", "Meet"}},
  };
  for (const auto& [hub, partners] : table) {
    o.hub_prior[sid(hub)] = 1.0;
    for (auto p : partners) o.partner_weight[sid(hub)][sid(p)] = 1.0;
  }
  return o;
}

void SyntheticOptions::validate() const {
  auto rate = [](double r, const char* name) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
  };
  rate(multi_event_rate, "multi_event_rate");
  rate(third_event_rate, "third_event_rate");
  rate(distractor_cue_rate, "distractor_cue_rate");
  rate(particle_rate, "particle_rate");
  double total = 0.0;
  for (std::size_t h = 0; h < K; ++h) {
    if (!(hub_prior[h] >= 0.0)) throw std::invalid_argument("hub_prior entries must be nonnegative");
    total += hub_prior[h];
    if (hub_prior[h] == 0.0) continue;
    if (partner_weight[h][h] != 0.0)
      throw std::invalid_argument("partner_weight of a subtype with itself must be zero");
    double row = 0.0;
    for (double w : partner_weight[h]) {
      if (!(w >= 0.0)) throw std::invalid_argument("partner_weight entries must be nonnegative");
      row += w;
    }
    if (multi_event_rate > 0.0 && row <= 0.0)
      throw std::invalid_argument("hub " + std::string(labels::subtypes()[h]) + " has no partners");
  }
  if (total <= 0.0) throw std::invalid_argument("hub_prior must have positive mass");
}

Corpus generate_synthetic_corpus(std::uint64_t seed, std::size_t n, const SyntheticOptions& options) {
  options.validate();
  Rng rng(seed);
  Corpus out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(generate_sentence(rng, options));
  return out;
}

Corpus generate_synthetic_corpus(std::uint64_t seed, std::size_t n, double multi_event_rate) {
  if (!(multi_event_rate >= 0.0 && multi_event_rate <= 1.0))
    throw std::invalid_argument("multi_event_rate must lie in [0, 1]");
  return generate_synthetic_corpus(seed, n, SyntheticOptions::defaults(multi_event_rate));
}

namespace {

// Probability of each distinct subtype set: {h} and {h, b}.
template <typename Fn>
void for_each_event_set(const SyntheticOptions& o, Fn&& fn) {
  double prior_total = 0.0;
  for (double p : o.hub_prior) prior_total += p;
  for (std::size_t h = 0; h < K; ++h) {
    if (o.hub_prior[h] == 0.0) continue;
    const double ph = o.hub_prior[h] / prior_total;
    fn(h, std::optional<std::size_t>{}, (1.0 - o.multi_event_rate) * ph);
    double row = 0.0;
    for (double w : o.partner_weight[h]) row += w;
    if (row == 0.0) continue;
    for (std::size_t b = 0; b < K; ++b)
      if (o.partner_weight[h][b] > 0.0)
        fn(h, std::optional<std::size_t>{b}, o.multi_event_rate * ph * o.partner_weight[h][b] / row);
  }
}

}  // namespace

std::array<double, K> subtype_presence_probability(const SyntheticOptions& options) {
  options.validate();
  std::array<double, K> p{};
  for_each_event_set(options, [&](std::size_t h, std::optional<std::size_t> b, double mass) {
    p[h] += mass;
    if (b) p[*b] += mass;
  });
  return p;
}

SubtypeMatrix cooccurrence_ground_truth(const SyntheticOptions& options) {
  options.validate();
  SubtypeMatrix joint{};
  for_each_event_set(options, [&](std::size_t h, std::optional<std::size_t> b, double mass) {
    joint[h][h] += mass;
    if (b) {
      joint[*b][*b] += mass;
      joint[h][*b] += mass;
      joint[*b][h] += mass;
    }
  });
  SubtypeMatrix out{};
  for (std::size_t a = 0; a < K; ++a)
    for (std::size_t b = 0; b < K; ++b) out[a][b] = joint[a][a] > 0.0 ? joint[a][b] / joint[a][a] : 0.0;
  return out;
}

}  // namespace jmee
