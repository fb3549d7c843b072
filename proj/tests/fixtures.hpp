#pragma once

#include <string>

#include "jmee/corpus.hpp"
#include "jmee/model.hpp"

namespace jmee::fixtures {

// Two events: "killed" (Die, four arguments) and "barrage" (Attack, three).
// killed -nmod-> witnesses -acl-> called -xcomp-> barrage is three arcs,
// against six steps in word order.
inline const char* kTwoEventRecord =
    R"({"tokens":[)"
    R"({"form":"Two","pos":"CD","head":1,"deprel":"nummod"},)"
    R"({"form":"journalists","pos":"NNS","head":3,"deprel":"nsubjpass"},)"
    R"({"form":"were","pos":"VBD","head":3,"deprel":"auxpass"},)"
    R"({"form":"killed","pos":"VBN","head":-1,"deprel":"ROOT"},)"
    R"({"form":"near","pos":"IN","head":5,"deprel":"case"},)"
    R"({"form":"witnesses","pos":"NNS","head":3,"deprel":"nmod"},)"
    R"({"form":"who","pos":"WP","head":7,"deprel":"nsubj"},)"
    R"({"form":"called","pos":"VBD","head":5,"deprel":"acl"},)"
    R"({"form":"a","pos":"DT","head":9,"deprel":"det"},)"
    R"({"form":"barrage","pos":"NN","head":7,"deprel":"xcomp"},)"
    R"({"form":"from","pos":"IN","head":12,"deprel":"case"},)"
    R"({"form":"a","pos":"DT","head":12,"deprel":"det"},)"
    R"({"form":"tank","pos":"NN","head":9,"deprel":"nmod"},)"
    R"({"form":"in","pos":"IN","head":14,"deprel":"case"},)"
    R"({"form":"Baghdad","pos":"NNP","head":3,"deprel":"nmod"},)"
    R"({"form":"on","pos":"IN","head":16,"deprel":"case"},)"
    R"({"form":"Tuesday","pos":"NNP","head":3,"deprel":"nmod:tmod"},)"
    R"({"form":".","pos":".","head":3,"deprel":"punct"}],)"
    R"("entities":[{"start":0,"end":2,"type":"PER"},{"start":5,"end":6,"type":"PER"},)"
    R"({"start":12,"end":13,"type":"WEA"},{"start":14,"end":15,"type":"GPE"},{"start":16,"end":17,"type":"TIME"}],)"
    R"("events":[)"
    R"({"trigger":{"start":3,"end":4},"subtype":"Die","args":[)"
    R"({"entity":0,"role":"Victim"},{"entity":2,"role":"Instrument"},)"
    R"({"entity":3,"role":"Place"},{"entity":4,"role":"Time-Within"}]},)"
    R"({"trigger":{"start":9,"end":10},"subtype":"Attack","args":[)"
    R"({"entity":2,"role":"Instrument"},{"entity":3,"role":"Place"},{"entity":4,"role":"Time-Within"}]}]})";

inline Sentence two_event_sentence() { return parse_sentence(kTwoEventRecord); }

// "police have arrested four people in connection with the killings"
inline Sentence arrest_sentence() {
  Sentence s;
  s.tokens = {{"police", "NNS", 2, "nsubj"},    {"have", "VBP", 2, "aux"},
              {"arrested", "VBN", kRootHead, "ROOT"}, {"four", "CD", 4, "nummod"},
              {"people", "NNS", 2, "dobj"},     {"in", "IN", 5, "case"},
              {"connection", "NN", 2, "nmod"},  {"with", "IN", 9, "case"},
              {"the", "DT", 9, "det"},          {"killings", "NNS", 6, "nmod"}};
  s.tokens[5].head = 6;
  s.entities = {{0, 1, "PER"}, {3, 5, "PER"}};
  s.events = {{2, 3, labels::subtype_id("Arrest-Jail"), {{0, labels::role_id("Agent")}, {1, labels::role_id("Person")}}},
              {9, 10, labels::subtype_id("Die"), {}}};
  return s;
}

inline ModelConfig tiny_config(std::size_t layers = 2) {
  ModelConfig c;
  c.word_dim = 6;
  c.pos_dim = c.position_dim = c.entity_dim = 3;
  c.lstm_hidden = 4;
  c.gcn_hidden = 5;
  c.gcn_layers = layers;
  c.attention_hidden = 5;
  c.transform_hidden = 4;
  c.max_len = 24;
  return c;
}

}  // namespace jmee::fixtures
