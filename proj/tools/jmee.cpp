// Command-line front end: gen | train | eval | predict | stats | selfcheck.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "jmee/synthetic.hpp"
#include "jmee/training.hpp"
#include "jmee/verify.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace jmee;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kRuntime = 2, kSelfcheckFailed = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " path is required");
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

/// Flat `key = value` lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(no) + ": expected key = value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

struct ModelOptions {
  ModelConfig model;
  TrainConfig train;
  std::size_t min_count = 1;
};

void add_model_options(CLI::App* cmd, ModelOptions& o) {
  auto& m = o.model;
  cmd->add_option("--word-dim", m.word_dim, "Word embedding width")->capture_default_str();
  cmd->add_option("--pos-dim", m.pos_dim, "POS embedding width")->capture_default_str();
  cmd->add_option("--position-dim", m.position_dim, "Position embedding width")->capture_default_str();
  cmd->add_option("--entity-dim", m.entity_dim, "Entity-type embedding width")->capture_default_str();
  cmd->add_option("--lstm-hidden", m.lstm_hidden, "LSTM units per direction")->capture_default_str();
  cmd->add_option("--gcn-hidden", m.gcn_hidden, "Graph convolution width")->capture_default_str();
  cmd->add_option("--gcn-layers", m.gcn_layers, "Graph convolution layers")->capture_default_str();
  cmd->add_option("--attention-hidden", m.attention_hidden, "Self-attention hidden units")->capture_default_str();
  cmd->add_option("--transform-hidden", m.transform_hidden, "Trigger transform units")->capture_default_str();
  cmd->add_option("--max-len", m.max_len, "Maximum sentence length")->capture_default_str();
  cmd->add_option("--seed", m.seed, "Random seed")->capture_default_str();
  auto& t = o.train;
  cmd->add_option("--batch-size", t.batch_size, "Sentences per batch")->capture_default_str();
  cmd->add_option("--dropout", t.dropout, "Dropout rate")->capture_default_str();
  cmd->add_option("--l2", t.l2, "L2 regularization coefficient")->capture_default_str();
  cmd->add_option("--epochs", t.epochs, "Maximum epochs")->capture_default_str();
  cmd->add_option("--patience", t.patience, "Early-stopping patience in epochs (0 disables)")->capture_default_str();
  cmd->add_option("--alpha", t.loss.alpha, "Loss weight of non-O trigger tokens")->capture_default_str();
  cmd->add_option("--beta", t.loss.beta, "Loss weight of the argument term")->capture_default_str();
  cmd->add_flag("!--no-gold-candidates", t.inject_gold_candidates,
                "Do not add missed gold triggers to the argument candidates");
  cmd->add_option("--min-count", o.min_count, "Minimum word frequency for the vocabulary")->capture_default_str();
}

void print_table(std::ostream& os, const std::string& title, const std::string& body) {
  os << title << '\n' << body;
}

// ---------------------------------------------------------------------------

int cmd_gen(std::uint64_t seed, std::size_t n, double rate, const std::string& out_dir) {
  if (out_dir.empty()) throw UsageError("--out is required");
  fs::create_directories(out_dir);
  const SyntheticOptions options = SyntheticOptions::defaults(rate);
  options.validate();
  const Corpus corpus = generate_synthetic_corpus(seed, n, options);
  const std::size_t n_train = n * 8 / 10, n_dev = n / 10;
  const auto begin = corpus.begin();
  save_corpus(fs::path(out_dir) / "train.jsonl", Corpus(begin, begin + static_cast<std::ptrdiff_t>(n_train)));
  save_corpus(fs::path(out_dir) / "dev.jsonl",
              Corpus(begin + static_cast<std::ptrdiff_t>(n_train), begin + static_cast<std::ptrdiff_t>(n_train + n_dev)));
  save_corpus(fs::path(out_dir) / "test.jsonl", Corpus(begin + static_cast<std::ptrdiff_t>(n_train + n_dev), corpus.end()));

  json truth{{"seed", seed}, {"multi_event_rate", rate}, {"subtypes", json::array()}, {"probability", json::array()}};
  for (auto s : labels::subtypes()) truth["subtypes"].push_back(std::string(s));
  for (const auto& row : cooccurrence_ground_truth(options)) truth["probability"].push_back(row);
  std::ofstream sidecar(fs::path(out_dir) / "cooccurrence.json");
  sidecar << truth.dump() << '\n';
  if (!sidecar) throw std::runtime_error("cannot write cooccurrence sidecar in " + out_dir);
  std::cout << "wrote " << n_train << '/' << n_dev << '/' << (n - n_train - n_dev) << " sentences to " << out_dir << '\n';
  return kOk;
}

int cmd_train(ModelOptions o, const std::string& train_path, const std::string& dev_path,
              const std::string& out_dir, const std::string& vocab_dir, const std::string& pretrained,
              std::size_t threads) {
  require_file(train_path, "training corpus");
  require_file(dev_path, "dev corpus");
  if (!pretrained.empty()) require_file(pretrained, "pretrained vectors");
  if (out_dir.empty()) throw UsageError("--out is required");
  o.train.max_len = o.model.max_len;
  o.train.seed = o.model.seed;
  o.train.threads = threads;
  try {
    o.model.validate();
    o.train.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const Corpus train_set = load_corpus(train_path);
  const Corpus dev_set = load_corpus(dev_path);
  if (train_set.empty()) throw UsageError("training corpus is empty: " + train_path);
  if (dev_set.empty()) throw UsageError("dev corpus is empty: " + dev_path);

  LabelCatalog catalog;
  if (!vocab_dir.empty()) {
    for (const char* f : {"words.txt", "pos.txt", "entity_types.txt"}) require_file((fs::path(vocab_dir) / f).string(), "vocabulary");
    catalog.words = Vocabulary::load(fs::path(vocab_dir) / "words.txt");
    catalog.pos = Vocabulary::load(fs::path(vocab_dir) / "pos.txt");
    catalog.entity_types = Vocabulary::load(fs::path(vocab_dir) / "entity_types.txt");
  } else {
    catalog = LabelCatalog::build(train_set, o.min_count);
  }
  fs::create_directories(out_dir);
  catalog.words.save(fs::path(out_dir) / "words.txt");
  catalog.pos.save(fs::path(out_dir) / "pos.txt");
  catalog.entity_types.save(fs::path(out_dir) / "entity_types.txt");

  Model model(o.model, catalog);
  if (!pretrained.empty()) {
    const std::size_t filled = model.load_pretrained_vectors(pretrained);
    std::cerr << "loaded " << filled << " pretrained vectors\n";
  }

  std::ofstream log(fs::path(out_dir) / "metrics.jsonl", std::ios::binary);
  const TrainResult result = train(std::move(model), train_set, dev_set, o.train, &log, [](const EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << "  loss " << r.train_loss << "  dev trigger F1 "
              << 100 * r.dev.trigger_classification.f1() << "  dev argument F1 " << 100 * r.dev.argument_role.f1()
              << '\n';
  });
  result.model.save(fs::path(out_dir) / "model.ckpt");
  std::cout << "best epoch " << result.best_epoch << (result.stopped_early ? " (early stop)" : "") << "\n";
  print_table(std::cout, "final dev", report_text(result.final_dev));
  return kOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& corpus_path, const std::string& predictions,
             bool split, const std::string& arg_split, bool as_json, std::size_t threads) {
  require_file(corpus_path, "corpus");
  if (predictions.empty()) require_file(checkpoint, "checkpoint");
  else require_file(predictions, "predictions");
  ArgumentSplit mode = ArgumentSplit::single_structure;
  if (arg_split == "argument") mode = ArgumentSplit::single_argument;
  else if (arg_split != "structure") throw UsageError("--arg-split must be 'structure' or 'argument'");

  const Corpus gold = load_corpus(corpus_path);
  PredictionSet predicted;
  if (!predictions.empty()) {
    for (auto& s : load_corpus(predictions)) predicted.push_back(std::move(s.events));
  } else {
    const Model model = Model::load(checkpoint);
    predicted = predict_corpus(gold, model, threads);
  }
  if (predicted.size() != gold.size())
    throw UsageError("predictions hold " + std::to_string(predicted.size()) + " sentences, corpus holds " +
                     std::to_string(gold.size()));
  const EvalReport overall = score(gold, predicted);
  if (split) {
    const SplitReport parts = score_split(gold, predicted, mode);
    std::cout << (as_json ? split_report_json(overall, parts) + "\n" : split_report_text(overall, parts));
  } else {
    std::cout << (as_json ? report_json(overall) + "\n" : report_text(overall));
  }
  return kOk;
}

int cmd_predict(const std::string& checkpoint, const std::string& corpus_path, const std::string& out_path,
                const std::string& attention_dir, bool verbose) {
  require_file(checkpoint, "checkpoint");
  require_file(corpus_path, "corpus");
  if (out_path.empty()) throw UsageError("--out is required");
  const Model model = Model::load(checkpoint);
  const Corpus corpus = load_corpus(corpus_path);
  if (!attention_dir.empty()) fs::create_directories(attention_dir);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const SentencePrediction p = predict_sentence(corpus[i], model);
    Sentence record = corpus[i];
    record.events = p.events;
    json j = json::parse(serialize_sentence(record));
    j["trigger_tags"] = json::array();
    for (auto t : p.trigger_tags) j["trigger_tags"].push_back(labels::tag_name(t));
    j["attention"] = p.attention;
    if (verbose) {
      json pairs = json::array();
      const std::size_t m = corpus[i].entities.size();
      for (std::size_t r = 0; r < p.role_probs.size(); ++r)
        pairs.push_back({{"candidate", r / m}, {"entity", r % m}, {"probs", p.role_probs[r]}});
      j["role_probs"] = pairs;
    }
    out << j.dump() << '\n';
    if (!attention_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "attention_%05zu.csv", i);
      export_attention(p, corpus[i], fs::path(attention_dir) / name);
    }
  }
  if (!out) throw std::runtime_error("write failed: " + out_path);
  return kOk;
}

int cmd_stats(const std::string& corpus_path, const std::string& matrix_out, bool as_json) {
  require_file(corpus_path, "corpus");
  const Corpus corpus = load_corpus(corpus_path);
  const SentenceSplit split = split_1v1_1vN(corpus);
  std::size_t events = 0, arguments = 0, tokens = 0;
  for (const auto& s : corpus) {
    tokens += s.size();
    events += s.events.size();
    for (const auto& e : s.events) arguments += e.arguments.size();
  }
  const CooccurrenceMatrix co = cooccurrence_stats(corpus);
  const double multi = corpus.empty() ? 0.0 : static_cast<double>(split.multiple.size()) / static_cast<double>(corpus.size());
  if (as_json) {
    json j{{"sentences", corpus.size()}, {"tokens", tokens}, {"events", events}, {"arguments", arguments},
           {"single_event_sentences", split.single.size()}, {"multi_event_sentences", split.multiple.size()},
           {"multi_event_fraction", multi}, {"support", co.support}, {"cooccurrence", co.probability}};
    std::cout << j.dump() << '\n';
  } else {
    std::cout << "sentences            " << corpus.size() << "\ntokens               " << tokens
              << "\nevents               " << events << "\narguments            " << arguments
              << "\n1/1 sentences        " << split.single.size() << "\n1/N sentences        " << split.multiple.size()
              << "\nmulti-event fraction " << multi << '\n';
  }
  if (!matrix_out.empty()) {
    std::ofstream out(matrix_out);
    if (!out) throw std::runtime_error("cannot write " + matrix_out);
    out << "subtype,support";
    for (auto s : labels::subtypes()) out << ',' << s;
    out << '\n';
    for (std::size_t a = 0; a < labels::kNumSubtypes; ++a) {
      out << labels::subtypes()[a] << ',' << co.support[a];
      for (double p : co.probability[a]) out << ',' << p;
      out << '\n';
    }
  }
  return kOk;
}

int cmd_selfcheck(const std::string& corrupt_op, std::uint64_t seed) {
  if (!corrupt_op.empty()) {
    const auto ops = verify::primitive_ops();
    if (std::find(ops.begin(), ops.end(), corrupt_op) == ops.end())
      throw UsageError("unknown op '" + corrupt_op + "' for --corrupt-op");
    ad::set_backward_fault(corrupt_op);
  }
  const auto start = std::chrono::steady_clock::now();
  const auto results = verify::run_selfcheck(seed);
  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS  " : "FAIL  ") << r.name << "  (" << r.detail << ")\n";
    ok = ok && r.passed;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << (ok ? "all checks passed" : "selfcheck FAILED") << " in " << secs << " s\n";
  ad::set_backward_fault(std::nullopt);
  return ok ? kOk : kSelfcheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint event extraction with syntactic graph convolution"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  app.add_option("--config", config_path, "Flat key = value config file (keys are long option names)")
      ->envname("JMEE_CONFIG");
  std::size_t threads = 1;
  app.add_option("--threads", threads, "Worker threads; 1 gives bit-reproducible runs")->capture_default_str();

  std::uint64_t gen_seed = 1;
  std::size_t gen_n = 1000;
  double gen_rate = 0.262;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus (train/dev/test 8:1:1)");
  gen->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
  gen->add_option("-n,--sentences", gen_n, "Number of sentences")->capture_default_str();
  gen->add_option("--rate", gen_rate, "Multi-event sentence rate")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory");

  ModelOptions model_opts;
  std::string train_path, dev_path, train_out, vocab_dir, pretrained;
  auto* trn = app.add_subcommand("train", "Train a model");
  trn->add_option("--train", train_path, "Training corpus");
  trn->add_option("--dev", dev_path, "Dev corpus");
  trn->add_option("--out", train_out, "Output directory for checkpoint, metrics and vocabularies");
  trn->add_option("--vocab-dir", vocab_dir, "Load vocabularies from this directory instead of building them");
  trn->add_option("--pretrained", pretrained, "Pretrained word vectors (word then values per line)");
  add_model_options(trn, model_opts);

  std::string checkpoint, corpus_path, predictions, arg_split = "structure";
  bool split = false, as_json = false;
  auto* ev = app.add_subcommand("eval", "Score a model or a prediction file");
  ev->add_option("--checkpoint", checkpoint, "Model checkpoint");
  ev->add_option("--corpus", corpus_path, "Gold corpus");
  ev->add_option("--predictions", predictions, "Score this prediction file instead of running the model");
  ev->add_flag("--split", split, "Add 1/1 and 1/N rows");
  ev->add_option("--arg-split", arg_split, "Argument bucketing: 'structure' (one event with arguments) or 'argument'")
      ->capture_default_str();
  ev->add_flag("--json", as_json, "Machine-readable output");

  std::string predict_out, attention_dir;
  bool verbose = false;
  auto* pr = app.add_subcommand("predict", "Write prediction records");
  pr->add_option("--checkpoint", checkpoint, "Model checkpoint");
  pr->add_option("--corpus", corpus_path, "Input corpus");
  pr->add_option("--out", predict_out, "Output file (one record per line)");
  pr->add_option("--attention-dir", attention_dir, "Write one attention CSV per sentence here");
  pr->add_flag("--verbose", verbose, "Include role distributions per (candidate, entity) pair");

  std::string matrix_out;
  auto* st = app.add_subcommand("stats", "Corpus statistics and event co-occurrence");
  st->add_option("--corpus", corpus_path, "Corpus");
  st->add_option("--matrix-out", matrix_out, "Write the conditional co-occurrence matrix as CSV");
  st->add_flag("--json", as_json, "Machine-readable output");

  std::string corrupt_op;
  std::uint64_t check_seed = 1;
  auto* sc = app.add_subcommand("selfcheck", "Gradient, oracle and codec checks");
  sc->add_option("--corrupt-op", corrupt_op, "Deliberately break the backward rule of this op");
  sc->add_option("--seed", check_seed, "Random seed")->capture_default_str();

  try {
    // Config values go in front of the real arguments, so flags win.
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string cfg;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) cfg = args[i + 1];
      else if (args[i].rfind("--config=", 0) == 0) cfg = args[i].substr(9);
    }
    if (cfg.empty()) {
      if (const char* env = std::getenv("JMEE_CONFIG")) cfg = env;
    }
    if (!cfg.empty()) {
      auto sub = std::find_if(args.begin(), args.end(), [&](const std::string& a) {
        return app.get_subcommand_no_throw(a) != nullptr;
      });
      if (sub != args.end()) {
        CLI::App* cmd = app.get_subcommand(*sub);
        std::vector<std::string> injected;
        for (const auto& [key, value] : read_config_file(cfg)) {
          const std::string flag = "--" + key;
          if (cmd->get_option_no_throw(flag) == nullptr) {
            bool known = false;
            for (auto* other : app.get_subcommands({})) known = known || other->get_option_no_throw(flag) != nullptr;
            if (!known) throw UsageError(cfg + ": unknown key '" + key + "'");
            continue;  // belongs to another command
          }
          injected.push_back(flag + "=" + value);
        }
        args.insert(sub + 1, injected.begin(), injected.end());
      }
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*gen) return cmd_gen(gen_seed, gen_n, gen_rate, gen_out);
    if (*trn) return cmd_train(model_opts, train_path, dev_path, train_out, vocab_dir, pretrained, threads);
    if (*ev) return cmd_eval(checkpoint, corpus_path, predictions, split, arg_split, as_json, threads);
    if (*pr) return cmd_predict(checkpoint, corpus_path, predict_out, attention_dir, verbose);
    if (*st) return cmd_stats(corpus_path, matrix_out, as_json);
    if (*sc) return cmd_selfcheck(corrupt_op, check_seed);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
