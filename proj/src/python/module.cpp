#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "jmee/synthetic.hpp"
#include "jmee/training.hpp"
#include "jmee/verify.hpp"

namespace py = pybind11;
using namespace jmee;

namespace {

// Sentences cross the boundary as JSON lines, the same records the CLI reads.
Corpus parse_all(const std::vector<std::string>& lines) {
  Corpus c;
  c.reserve(lines.size());
  for (const auto& l : lines) c.push_back(parse_sentence(l));
  return c;
}

std::vector<std::string> serialize_all(const Corpus& c) {
  std::vector<std::string> out;
  out.reserve(c.size());
  for (const auto& s : c) out.push_back(serialize_sentence(s));
  return out;
}

template <typename T>
void set_if(const py::dict& d, const char* key, T& field) {
  if (d.contains(key)) field = d[key].cast<T>();
}

ModelConfig model_config(const py::dict& d) {
  ModelConfig c;
  set_if(d, "word_dim", c.word_dim);
  set_if(d, "pos_dim", c.pos_dim);
  set_if(d, "position_dim", c.position_dim);
  set_if(d, "entity_dim", c.entity_dim);
  set_if(d, "lstm_hidden", c.lstm_hidden);
  set_if(d, "gcn_hidden", c.gcn_hidden);
  set_if(d, "gcn_layers", c.gcn_layers);
  set_if(d, "attention_hidden", c.attention_hidden);
  set_if(d, "transform_hidden", c.transform_hidden);
  set_if(d, "max_len", c.max_len);
  set_if(d, "seed", c.seed);
  c.validate();
  return c;
}

TrainConfig train_config(const py::dict& d) {
  TrainConfig c;
  set_if(d, "batch_size", c.batch_size);
  set_if(d, "max_len", c.max_len);
  set_if(d, "dropout", c.dropout);
  set_if(d, "l2", c.l2);
  set_if(d, "epochs", c.epochs);
  set_if(d, "seed", c.seed);
  set_if(d, "patience", c.patience);
  set_if(d, "threads", c.threads);
  set_if(d, "inject_gold_candidates", c.inject_gold_candidates);
  set_if(d, "alpha", c.loss.alpha);
  set_if(d, "beta", c.loss.beta);
  c.validate();
  return c;
}

py::dict prf(const PRF& p) {
  py::dict d;
  d["precision"] = p.precision();
  d["recall"] = p.recall();
  d["f1"] = p.f1();
  d["tp"] = p.true_positives;
  d["predicted"] = p.predicted;
  d["gold"] = p.gold;
  return d;
}

py::dict report(const EvalReport& r) {
  py::dict d;
  d["trigger_identification"] = prf(r.trigger_identification);
  d["trigger_classification"] = prf(r.trigger_classification);
  d["argument_identification"] = prf(r.argument_identification);
  d["argument_role"] = prf(r.argument_role);
  return d;
}

PredictionSet predictions_of(const std::vector<std::string>& lines) {
  PredictionSet p;
  for (auto& s : parse_all(lines)) p.push_back(std::move(s.events));
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Joint event extraction core";

  py::register_exception<CorpusError>(m, "CorpusError", PyExc_ValueError);
  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", PyExc_RuntimeError);

  m.def("subtypes", [] { return std::vector<std::string>(labels::subtypes().begin(), labels::subtypes().end()); });
  m.def("roles", [] { return std::vector<std::string>(labels::roles().begin(), labels::roles().end()); });

  m.def("generate", [](std::uint64_t seed, std::size_t n, double rate) {
    return serialize_all(generate_synthetic_corpus(seed, n, rate));
  }, py::arg("seed"), py::arg("n"), py::arg("multi_event_rate") = 0.262);

  m.def("cooccurrence", [](const std::vector<std::string>& corpus) {
    const CooccurrenceMatrix c = cooccurrence_stats(parse_all(corpus));
    return py::make_tuple(c.probability, c.support);
  });
  m.def("cooccurrence_truth", [](double rate) { return cooccurrence_ground_truth(SyntheticOptions::defaults(rate)); },
        py::arg("multi_event_rate") = 0.262);

  m.def("score", [](const std::vector<std::string>& gold, const std::vector<std::string>& predicted) {
    return report(score(parse_all(gold), predictions_of(predicted)));
  });
  m.def("score_split", [](const std::vector<std::string>& gold, const std::vector<std::string>& predicted,
                          bool by_argument) {
    const SplitReport s = score_split(parse_all(gold), predictions_of(predicted),
                                      by_argument ? ArgumentSplit::single_argument : ArgumentSplit::single_structure);
    return py::make_tuple(report(s.single), report(s.multiple));
  }, py::arg("gold"), py::arg("predicted"), py::arg("by_argument") = false);

  m.def("selfcheck", [](std::uint64_t seed) {
    std::vector<py::tuple> out;
    for (const auto& c : verify::run_selfcheck(seed)) out.push_back(py::make_tuple(c.name, c.passed, c.detail));
    return out;
  }, py::arg("seed") = 1);

  py::class_<Model>(m, "Model")
      .def(py::init([](const std::vector<std::string>& corpus, const py::dict& config) {
        return Model(model_config(config), LabelCatalog::build(parse_all(corpus)));
      }), py::arg("corpus"), py::arg("config") = py::dict())
      .def_static("load", [](const std::string& path) { return Model::load(path); })
      .def("save", [](const Model& self, const std::string& path) { self.save(path); })
      .def_property_readonly("parameter_count", [](const Model& self) { return self.params().element_count(); })
      .def("predict", [](const Model& self, const std::string& sentence) {
        const Sentence s = parse_sentence(sentence);
        SentencePrediction p;
        {
          py::gil_scoped_release release;
          p = predict_sentence(s, self);
        }
        Sentence record = s;
        record.events = p.events;
        py::dict d;
        d["record"] = serialize_sentence(record);
        std::vector<std::string> tags;
        for (auto t : p.trigger_tags) tags.push_back(labels::tag_name(t));
        d["trigger_tags"] = tags;
        d["attention"] = p.attention;
        return d;
      });

  m.def("train", [](const Model& initial, const std::vector<std::string>& train_set,
                    const std::vector<std::string>& dev_set, const py::dict& config) {
    const TrainConfig cfg = train_config(config);
    const Corpus tr = parse_all(train_set), dv = parse_all(dev_set);
    TrainResult r = [&] {
      py::gil_scoped_release release;
      return train(initial, tr, dv, cfg);
    }();
    py::list history;
    for (const auto& e : r.history) {
      py::dict d;
      d["epoch"] = e.epoch;
      d["train_loss"] = e.train_loss;
      d["dev"] = report(e.dev);
      history.append(d);
    }
    return py::make_tuple(std::move(r.model), history, r.best_epoch);
  }, py::arg("model"), py::arg("train"), py::arg("dev"), py::arg("config") = py::dict());
}
