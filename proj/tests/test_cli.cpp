#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;  // stdout and stderr interleaved
};

Outcome run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + JMEE_CLI_PATH + " " + args + " 2>&1";
  Outcome r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

const char* kSmall =
    " --word-dim 8 --pos-dim 4 --position-dim 4 --entity-dim 4 --lstm-hidden 6 --gcn-hidden 6"
    " --attention-hidden 6 --transform-hidden 6";

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("jmee_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    data_ = dir_ / "data";
    ASSERT_EQ(run("gen --seed 3 -n 100 --out " + data_.string()).code, 0);
    model_ = dir_ / "model";
    const Outcome t = run("train --train " + (data_ / "train.jsonl").string() + " --dev " + (data_ / "dev.jsonl").string() +
                      " --out " + model_.string() + " --epochs 2" + kSmall);
    ASSERT_EQ(t.code, 0) << t.out;
    train_output_ = t.out;
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static fs::path dir_, data_, model_;
  static std::string train_output_;
};

fs::path Cli::dir_, Cli::data_, Cli::model_;
std::string Cli::train_output_;

}  // namespace

TEST_F(Cli, GenSplitsAndIsReproducible) {
  EXPECT_EQ(line_count(data_ / "train.jsonl"), 80u);
  EXPECT_EQ(line_count(data_ / "dev.jsonl"), 10u);
  EXPECT_EQ(line_count(data_ / "test.jsonl"), 10u);
  EXPECT_TRUE(fs::exists(data_ / "cooccurrence.json"));
  const fs::path again = dir_ / "again";
  ASSERT_EQ(run("gen --seed 3 -n 100 --out " + again.string()).code, 0);
  for (const char* f : {"train.jsonl", "dev.jsonl", "test.jsonl", "cooccurrence.json"})
    EXPECT_EQ(slurp(data_ / f), slurp(again / f)) << f;
}

TEST_F(Cli, MissingPathIsAUsageError) {
  const std::string missing = (dir_ / "nope.jsonl").string();
  const Outcome r = run("train --train " + missing + " --dev " + missing + " --out " + (dir_ / "x").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find(missing), std::string::npos) << r.out;
}

TEST_F(Cli, BadUsage) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("gen --rate 2 --out " + (dir_ / "r").string()).code, 1);
  EXPECT_EQ(run("selfcheck --corrupt-op no_such_op").code, 1);
}

TEST_F(Cli, ZeroEpochsWritesInitialCheckpoint) {
  const fs::path out = dir_ / "zero";
  const Outcome r = run("train --train " + (data_ / "train.jsonl").string() + " --dev " + (data_ / "dev.jsonl").string() +
                    " --out " + out.string() + " --epochs 0" + kSmall);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(out / "model.ckpt"));
  EXPECT_NE(r.out.find("best epoch 0"), std::string::npos);
}

TEST_F(Cli, GoldAsPredictionsScoresPerfectly) {
  const std::string gold = (data_ / "test.jsonl").string();
  const Outcome r = run("eval --corpus " + gold + " --predictions " + gold + " --json");
  ASSERT_EQ(r.code, 0) << r.out;
  std::size_t ones = 0;
  for (std::size_t at = 0; (at = r.out.find("\"f1\":1.0", at)) != std::string::npos; ++at) ++ones;
  EXPECT_EQ(ones, 4u) << r.out;

  const Outcome plain = run("eval --corpus " + gold + " --predictions " + gold);
  const Outcome split = run("eval --corpus " + gold + " --predictions " + gold + " --split");
  EXPECT_EQ(plain.out.find("1/N"), std::string::npos);
  EXPECT_NE(split.out.find("1/1"), std::string::npos);
  EXPECT_NE(split.out.find("1/N"), std::string::npos);
}

TEST_F(Cli, PredictionsRescoreToTrainingFinalDev) {
  const fs::path preds = dir_ / "dev_pred.jsonl";
  const std::string dev = (data_ / "dev.jsonl").string();
  ASSERT_EQ(run("predict --checkpoint " + (model_ / "model.ckpt").string() + " --corpus " + dev + " --out " +
                preds.string())
                .code,
            0);
  EXPECT_EQ(line_count(preds), 10u);
  const Outcome from_preds = run("eval --corpus " + dev + " --predictions " + preds.string());
  const Outcome from_model = run("eval --corpus " + dev + " --checkpoint " + (model_ / "model.ckpt").string());
  ASSERT_EQ(from_preds.code, 0) << from_preds.out;
  EXPECT_EQ(from_preds.out, from_model.out);
  EXPECT_NE(train_output_.find(from_preds.out), std::string::npos) << train_output_ << "\n---\n" << from_preds.out;
}

TEST_F(Cli, PredictEmptyCorpusAndAttentionFiles) {
  const fs::path empty = dir_ / "empty.jsonl";
  std::ofstream(empty).close();
  const fs::path out = dir_ / "empty_pred.jsonl";
  const std::string ckpt = (model_ / "model.ckpt").string();
  ASSERT_EQ(run("predict --checkpoint " + ckpt + " --corpus " + empty.string() + " --out " + out.string()).code, 0);
  EXPECT_EQ(slurp(out), "");

  const fs::path att = dir_ / "att";
  ASSERT_EQ(run("predict --checkpoint " + ckpt + " --corpus " + (data_ / "dev.jsonl").string() + " --out " +
                (dir_ / "p.jsonl").string() + " --attention-dir " + att.string() + " --verbose")
                .code,
            0);
  std::size_t csvs = 0;
  for (const auto& e : fs::directory_iterator(att)) csvs += e.path().extension() == ".csv";
  EXPECT_EQ(csvs, 10u);
  EXPECT_NE(slurp(dir_ / "p.jsonl").find("\"role_probs\""), std::string::npos);
}

TEST_F(Cli, StatsReportsCounts) {
  const Outcome r = run("stats --corpus " + (data_ / "train.jsonl").string() + " --json --matrix-out " +
                    (dir_ / "m.csv").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("\"sentences\":80"), std::string::npos) << r.out;
  EXPECT_EQ(line_count(dir_ / "m.csv"), 34u);
}

TEST_F(Cli, ConfigFilePrecedence) {
  const fs::path cfg = dir_ / "run.cfg";
  std::ofstream(cfg) << "# dims\nword-dim = 8\npos-dim = 4\nposition-dim = 4\nentity-dim = 4\nlstm-hidden = 6\n"
                        "gcn-hidden = 6\nattention-hidden = 6\ntransform-hidden = 6\nepochs = 0\nsentences = 7\n";
  const std::string base = "train --train " + (data_ / "train.jsonl").string() + " --dev " +
                           (data_ / "dev.jsonl").string() + " --out ";
  // file sets epochs 0; a flag overrides it
  Outcome r = run("--config " + cfg.string() + " " + base + (dir_ / "c1").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("epoch 1 "), std::string::npos) << r.out;
  r = run("--config " + cfg.string() + " " + base + (dir_ / "c2").string() + " --epochs 1");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("epoch 1 "), std::string::npos) << r.out;

  // environment variable supplies the default path
  r = run(base + (dir_ / "c3").string(), "JMEE_CONFIG=" + cfg.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("epoch 1 "), std::string::npos) << r.out;

  // a gen key in the file does not disturb train, and applies to gen
  r = run("--config " + cfg.string() + " gen --out " + (dir_ / "g").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("wrote 5/0/2"), std::string::npos) << r.out;

  std::ofstream(dir_ / "bad.cfg") << "no-such-key = 1\n";
  r = run("--config " + (dir_ / "bad.cfg").string() + " " + base + (dir_ / "c4").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("no-such-key"), std::string::npos) << r.out;
}

TEST_F(Cli, HelpShowsDefaults) {
  const Outcome r = run("train --help");
  EXPECT_EQ(r.code, 0);
  for (const char* s : {"300", "220", "0.5", "1e-08", "32", "50", "200"})
    EXPECT_NE(r.out.find(s), std::string::npos) << s << "\n" << r.out;
}

TEST_F(Cli, SelfcheckPassesAndCatchesCorruption) {
  Outcome r = run("selfcheck");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("all checks passed"), std::string::npos);
  r = run("selfcheck --corrupt-op tanh");
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
  EXPECT_NE(r.out.find("tanh"), std::string::npos);
}
