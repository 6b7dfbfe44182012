#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "user/cli/app.hpp"
#include "user/cli/run_config.hpp"
#include "user/common/error.hpp"

namespace user {
namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "user");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"fly"}).code, kExitUsage);
  EXPECT_EQ(cli({"gen"}).code, kExitUsage);  // --out is required
  EXPECT_EQ(cli({"gen", "--out", "x", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(cli({"eval", "--model", "m"}).code, kExitUsage);
}

TEST(Cli, HelpListsSubcommandsAndFlags) {
  const auto r = cli({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  for (const char* sub : {"gen", "prepare", "pretrain", "finetune", "eval", "rank", "gradcheck"})
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  const auto ft = cli({"finetune", "--help"});
  for (const char* flag : {"--model", "--task", "--data", "--out", "--workers", "--config", "--set"})
    EXPECT_NE(ft.out.find(flag), std::string::npos) << flag;
}

TEST(Cli, ValidationFailuresExitOne) {
  const auto tmp = std::filesystem::temp_directory_path() / "user_cli_bad";
  EXPECT_EQ(cli({"gen", "--out", tmp.string(), "--set", "no.such.key=1"}).code, kExitFailure);
  EXPECT_EQ(cli({"gen", "--out", tmp.string(), "--set", "gen.p_follow=2"}).code, kExitFailure);
  EXPECT_EQ(cli({"gen", "--out", tmp.string(), "--set", "gen.n_users=many"}).code, kExitFailure);
  EXPECT_EQ(cli({"prepare", "--log", (tmp / "missing.jsonl").string()}).code, kExitFailure);
  EXPECT_EQ(cli({"gradcheck", "--dim", "4", "--tol", "1e-30"}).code, kExitFailure);
}

TEST(Cli, GradcheckPasses) {
  const auto r = cli({"gradcheck", "--dim", "8"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
}

TEST(RunConfigFile, ParsesOverridesAndEchoes) {
  const auto path = std::filesystem::temp_directory_path() / "user_cfg_test.cfg";
  {
    std::ofstream out(path);
    out << "# comment\ndim = 16   # trailing\n\nlr = 0.01\n";
  }
  RunConfig rc;
  rc.load_file(path);
  rc.set_assignment("heads=2");
  EXPECT_EQ(rc.model().dim, 16);
  EXPECT_EQ(rc.model().heads, 2);
  EXPECT_DOUBLE_EQ(rc.pretrain().lr, 0.01);
  EXPECT_TRUE(rc.finetune().eval_initial);

  // The echo is a config file that reproduces itself.
  {
    std::ofstream out(path);
    out << rc.echo();
  }
  RunConfig again;
  again.load_file(path);
  EXPECT_EQ(again.echo(), rc.echo());
  EXPECT_THROW(rc.set("dim", "-3"), ConfigError);
  EXPECT_THROW(rc.set_assignment("dim"), ConfigError);
  std::filesystem::remove(path);
}

class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = std::filesystem::temp_directory_path() / "user_cli_pipeline";
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
    std::ofstream cfg(dir_ / "tiny.cfg");
    cfg << "dim = 8\nheads = 2\nhead_dim = 4\nffn_dim = 8\natt_dim = 8\nmax_len = 12\n"
        << "epochs = 1\nfinetune_epochs = 1\nbatch = 8\n"
        << "gen.n_users = 10\ngen.n_topics = 4\ngen.ambiguous_words = 2\ngen.docs_per_topic = 20\ngen.weeks = 6\n";
  }
  static void TearDownTestSuite() { std::filesystem::remove_all(dir_); }
  static std::string p(const std::string& rel) { return (dir_ / rel).string(); }
  static std::filesystem::path dir_;
};

std::filesystem::path CliPipeline::dir_;

TEST_F(CliPipeline, EndToEnd) {
  auto r = cli({"gen", "--config", p("tiny.cfg"), "--out", p("data")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* f : {"log.jsonl", "corpus.jsonl", "manifest.json", "config.echo"})
    EXPECT_TRUE(std::filesystem::exists(dir_ / "data" / f)) << f;

  r = cli({"prepare", "--config", p("tiny.cfg"), "--log", p("data/log.jsonl")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl", "vocab.tsv", "summary.json"})
    EXPECT_TRUE(std::filesystem::exists(dir_ / "data" / "prepared" / f)) << f;
  EXPECT_NE(r.out.find("train"), std::string::npos);

  r = cli({"pretrain", "--config", p("tiny.cfg"), "--data", p("data/prepared"), "--out", p("unified")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir_ / "unified" / "model.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(dir_ / "unified" / "config.echo"));
  EXPECT_NE(slurp(dir_ / "unified" / "metrics.jsonl").find("\"epoch\":1"), std::string::npos);

  r = cli({"finetune", "--config", p("tiny.cfg"), "--model", p("unified"), "--task", "search", "--data",
           p("data/prepared"), "--out", p("search")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(cli({"finetune", "--config", p("tiny.cfg"), "--model", p("search"), "--task", "search", "--data",
                 p("data/prepared"), "--out", p("again")})
                .code,
            kExitFailure);
  EXPECT_EQ(cli({"finetune", "--model", p("unified"), "--task", "browse", "--data", p("data/prepared"), "--out",
                 p("bad")})
                .code,
            kExitFailure);

  r = cli({"eval", "--model", p("search"), "--data", p("data/prepared"), "--split", "test", "--out", p("report.json"),
           "--dump", p("per.tsv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto report = nlohmann::json::parse(slurp(dir_ / "report.json"));
  EXPECT_EQ(report.at("task"), "search");
  for (const char* k : {"map", "mrr", "p1", "avgc", "ndcg5", "ndcg10", "auc"}) EXPECT_TRUE(report.contains(k)) << k;
  EXPECT_TRUE(std::filesystem::exists(dir_ / "per.tsv"));

  // Scoring is deterministic: a second eval prints the same report.
  const auto again = cli({"eval", "--model", p("search"), "--data", p("data/prepared"), "--split", "test"});
  EXPECT_EQ(again.out, r.out);

  r = cli({"rank", "--model", p("search"), "--impressions", p("data/prepared/test.jsonl"), "--out", p("rank.tsv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto ranked = slurp(dir_ / "rank.tsv");
  EXPECT_GT(std::count(ranked.begin(), ranked.end(), '\n'), 10);
}

}  // namespace
}  // namespace user
