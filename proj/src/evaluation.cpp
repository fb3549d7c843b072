#include "jmee/evaluation.hpp"

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "jmee/heads.hpp"

namespace jmee {

double PRF::precision() const {
  return predicted == 0 ? 0.0 : static_cast<double>(true_positives) / static_cast<double>(predicted);
}

double PRF::recall() const {
  return gold == 0 ? 0.0 : static_cast<double>(true_positives) / static_cast<double>(gold);
}

double PRF::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

PRF& PRF::operator+=(const PRF& o) {
  true_positives += o.true_positives;
  predicted += o.predicted;
  gold += o.gold;
  return *this;
}

EvalReport& EvalReport::operator+=(const EvalReport& o) {
  trigger_identification += o.trigger_identification;
  trigger_classification += o.trigger_classification;
  argument_identification += o.argument_identification;
  argument_role += o.argument_role;
  return *this;
}

namespace {

template <typename Key>
PRF greedy_match(const std::vector<Key>& predicted, const std::vector<Key>& gold) {
  PRF prf{0, predicted.size(), gold.size()};
  std::vector<bool> used(gold.size(), false);
  for (const Key& p : predicted) {
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (!used[g] && gold[g] == p) {
        used[g] = true;
        ++prf.true_positives;
        break;
      }
    }
  }
  return prf;
}

using SpanKey = std::tuple<std::size_t, std::size_t>;
using TypedSpanKey = std::tuple<std::size_t, std::size_t, std::size_t>;
using ArgKey = std::tuple<std::size_t, std::size_t, std::size_t>;
using RoleKey = std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>;

struct Keys {
  std::vector<SpanKey> spans;
  std::vector<TypedSpanKey> typed;
  std::vector<ArgKey> args;
  std::vector<RoleKey> roles;
};

Keys keys_of(const std::vector<EventMention>& events, const Sentence& s, const char* what) {
  Keys k;
  for (std::size_t v = 0; v < events.size(); ++v) {
    const auto& ev = events[v];
    k.spans.emplace_back(ev.trigger_start, ev.trigger_end);
    k.typed.emplace_back(ev.trigger_start, ev.trigger_end, ev.subtype);
    for (const auto& a : ev.arguments) {
      if (a.entity >= s.entities.size())
        throw std::invalid_argument(std::string(what) + " events[" + std::to_string(v) +
                                    "] references entity " + std::to_string(a.entity) + " but the sentence has " +
                                    std::to_string(s.entities.size()));
      const auto& e = s.entities[a.entity];
      k.args.emplace_back(ev.subtype, e.start, e.end);
      k.roles.emplace_back(ev.subtype, e.start, e.end, a.role);
    }
  }
  return k;
}

void require_aligned(const Corpus& gold, const PredictionSet& predicted) {
  if (gold.size() != predicted.size())
    throw std::invalid_argument("prediction set has " + std::to_string(predicted.size()) +
                                " sentences, gold corpus has " + std::to_string(gold.size()));
}

}  // namespace

EvalReport score_sentence(const Sentence& gold, const std::vector<EventMention>& predicted) {
  const Keys p = keys_of(predicted, gold, "predicted");
  const Keys g = keys_of(gold.events, gold, "gold");
  EvalReport r;
  r.trigger_identification = greedy_match(p.spans, g.spans);
  r.trigger_classification = greedy_match(p.typed, g.typed);
  r.argument_identification = greedy_match(p.args, g.args);
  r.argument_role = greedy_match(p.roles, g.roles);
  return r;
}

EvalReport score(const Corpus& gold, const PredictionSet& predicted) {
  require_aligned(gold, predicted);
  EvalReport total;
  for (std::size_t i = 0; i < gold.size(); ++i) total += score_sentence(gold[i], predicted[i]);
  return total;
}

SplitReport score_split(const Corpus& gold, const PredictionSet& predicted, ArgumentSplit mode) {
  require_aligned(gold, predicted);
  SplitReport out;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const Sentence& s = gold[i];
    const EvalReport r = score_sentence(s, predicted[i]);

    const std::size_t triggers = s.events.size();
    if (triggers >= 1) {
      EvalReport& bucket = triggers == 1 ? out.single : out.multiple;
      bucket.trigger_identification += r.trigger_identification;
      bucket.trigger_classification += r.trigger_classification;
    }

    std::size_t units = 0;
    for (const auto& ev : s.events) {
      if (mode == ArgumentSplit::single_structure)
        units += ev.arguments.empty() ? 0 : 1;
      else
        units += ev.arguments.size();
    }
    if (units >= 1) {
      EvalReport& bucket = units == 1 ? out.single : out.multiple;
      bucket.argument_identification += r.argument_identification;
      bucket.argument_role += r.argument_role;
    }
  }
  return out;
}

CooccurrenceMatrix cooccurrence_stats(const Corpus& corpus) {
  constexpr std::size_t K = labels::kNumSubtypes;
  CooccurrenceMatrix m;
  std::array<std::array<std::size_t, K>, K> joint{};
  for (const auto& s : corpus) {
    std::array<bool, K> present{};
    for (const auto& ev : s.events) present[ev.subtype] = true;
    for (std::size_t a = 0; a < K; ++a) {
      if (!present[a]) continue;
      ++m.support[a];
      for (std::size_t b = 0; b < K; ++b)
        if (present[b]) ++joint[a][b];
    }
  }
  for (std::size_t a = 0; a < K; ++a)
    for (std::size_t b = 0; b < K; ++b)
      m.probability[a][b] =
          m.support[a] == 0 ? 0.0 : static_cast<double>(joint[a][b]) / static_cast<double>(m.support[a]);
  return m;
}

namespace {

std::string csv_quote(const std::string& field) {
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_attention_csv(std::ostream& out, const std::vector<std::string>& forms,
                         const std::vector<double>& scores) {
  const std::size_t n = scores.size();
  if (forms.size() != n)
    throw std::invalid_argument("write_attention_csv: " + std::to_string(forms.size()) + " forms for " +
                                std::to_string(n) + " scores");
  for (std::size_t j = 0; j < n; ++j) out << (j ? "," : "") << csv_quote(forms[j]);
  out << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out << (j ? "," : "") << format_double(i == j ? 0.0 : scores[j]);
    out << '\n';
  }
}

void export_attention(const SentencePrediction& prediction, const Sentence& sentence,
                      const std::filesystem::path& path) {
  std::vector<std::string> forms;
  for (std::size_t i = 0; i < prediction.attention.size(); ++i) forms.push_back(sentence.tokens.at(i).form);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_attention_csv(out, forms, prediction.attention);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {

void row(std::ostringstream& os, const char* name, const PRF& p) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-26s %6.1f %6.1f %6.1f   (tp %zu, pred %zu, gold %zu)\n", name,
                100 * p.precision(), 100 * p.recall(), 100 * p.f1(), p.true_positives, p.predicted, p.gold);
  os << buf;
}

void rows(std::ostringstream& os, const EvalReport& r, const std::string& suffix) {
  row(os, ("Trigger Identification" + suffix).c_str(), r.trigger_identification);
  row(os, ("Trigger Classification" + suffix).c_str(), r.trigger_classification);
  row(os, ("Argument Identification" + suffix).c_str(), r.argument_identification);
  row(os, ("Argument Role" + suffix).c_str(), r.argument_role);
}

nlohmann::ordered_json prf_json(const PRF& p) {
  return {{"precision", p.precision()}, {"recall", p.recall()}, {"f1", p.f1()},
          {"tp", p.true_positives},     {"predicted", p.predicted}, {"gold", p.gold}};
}

nlohmann::ordered_json report_object(const EvalReport& r) {
  return {{"trigger_identification", prf_json(r.trigger_identification)},
          {"trigger_classification", prf_json(r.trigger_classification)},
          {"argument_identification", prf_json(r.argument_identification)},
          {"argument_role", prf_json(r.argument_role)}};
}

}  // namespace

std::string report_text(const EvalReport& r) {
  std::ostringstream os;
  os << "stage                           P      R     F1\n";
  rows(os, r, "");
  return os.str();
}

std::string split_report_text(const EvalReport& overall, const SplitReport& split) {
  std::ostringstream os;
  os << report_text(overall) << "\nsplit   trigger F1   argument F1\n";
  char buf[96];
  for (const auto& [name, r] : {std::pair{"1/1", &split.single}, std::pair{"1/N", &split.multiple}}) {
    std::snprintf(buf, sizeof buf, "%-7s %10.1f %13.1f\n", name, 100 * r->trigger_classification.f1(),
                  100 * r->argument_role.f1());
    os << buf;
  }
  return os.str();
}

std::string report_json(const EvalReport& r) { return report_object(r).dump(); }

std::string split_report_json(const EvalReport& overall, const SplitReport& split) {
  nlohmann::ordered_json j = report_object(overall);
  j["single"] = report_object(split.single);
  j["multiple"] = report_object(split.multiple);
  return j.dump();
}

}  // namespace jmee
