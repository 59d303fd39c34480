// End-to-end tests of the command-line tool: every subcommand is exercised
// through a real process spawn against small generated inputs.
#define DOCTEST_CONFIG_IMPLEMENT
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "../support/synthetic.hpp"
#include "../support/temp.hpp"
#include "ate/corpus.hpp"
#include "ate/evaluation.hpp"

namespace {

std::string g_ate_bin;
std::string g_data_dir;

struct CmdResult {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

CmdResult run_cli(const std::string& args, const ate_test::TempDir& dir,
                  const std::string& tag) {
  CmdResult result;
  const std::string out_path = dir.file(tag + ".out");
  const std::string err_path = dir.file(tag + ".err");
  const std::string cmd = g_ate_bin + " " + args + " >" + out_path + " 2>" + err_path;
  const int rc = std::system(cmd.c_str());
  result.status = (rc >= 0 && WIFEXITED(rc)) ? WEXITSTATUS(rc) : -1;
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  return result;
}

// Writes a small but learnable train/test pair plus a matching vector file.
struct CliFixture {
  std::string train_jsonl;
  std::string test_jsonl;
  std::string vectors;

  CliFixture(const ate_test::TempDir& dir, int n_train, int n_test) {
    const ate_test::SyntheticCorpus corpus = ate_test::make_synthetic_corpus(n_train, n_test, 23);
    train_jsonl = dir.file("train.jsonl");
    test_jsonl = dir.file("test.jsonl");
    vectors = dir.file("vectors.txt");
    std::ofstream tr(train_jsonl);
    ate::write_jsonl(tr, corpus.train);
    std::ofstream te(test_jsonl);
    ate::write_jsonl(te, corpus.test);
    ate_test::write_vector_file(vectors, ate_test::make_synthetic_table(16, 29));
  }
};

}  // namespace

TEST_CASE("cli: ingest parses xml, writes jsonl and prints the profile") {
  const ate_test::TempDir dir;
  const std::string out_jsonl = dir.file("reviews.jsonl");
  const CmdResult r =
      run_cli("ingest " + g_data_dir + "/mini_reviews.xml " + out_jsonl, dir, "ingest");
  CHECK(r.status == 0);
  CHECK(r.out.find("sentences=4") != std::string::npos);
  CHECK(r.out.find("aspects=3") != std::string::npos);
  CHECK(r.out.find("multi_aspect_fraction=0.6667") != std::string::npos);
  CHECK(r.err.find("s4") != std::string::npos);  // dropped-span warning

  const auto sentences = ate::read_jsonl_file(out_jsonl);
  REQUIRE(sentences.size() == 4);
  CHECK(sentences[0].id == "s1");
  CHECK(sentences[0].tokens.size() == 10);
}

TEST_CASE("cli: ingest reports unreadable input as a one-line error") {
  const ate_test::TempDir dir;
  const CmdResult r = run_cli("ingest /no/such/file.xml " + dir.file("x.jsonl"), dir, "bad");
  CHECK(r.status == 1);
  CHECK(r.err.rfind("error: ", 0) == 0);
}

TEST_CASE("cli: coverage reports missing word types as csv") {
  const ate_test::TempDir dir;
  const std::string out_jsonl = dir.file("reviews.jsonl");
  REQUIRE(run_cli("ingest " + g_data_dir + "/mini_reviews.xml " + out_jsonl, dir, "ingest")
              .status == 0);
  const CmdResult r = run_cli("coverage --vectors " + g_data_dir +
                                  "/mini_vectors.txt --name toy --data " + out_jsonl +
                                  " --out " + dir.file("cov.csv"),
                              dir, "coverage");
  CHECK(r.status == 0);
  const std::string csv = slurp(dir.file("cov.csv"));
  CHECK(csv.rfind("embedding,subset,pct_missing", 0) == 0);
  CHECK(csv.find("toy,reviews,") != std::string::npos);
  CHECK(csv.find("toy,average,") != std::string::npos);
}

TEST_CASE("cli: train writes a run record plus a reloadable checkpoint") {
  const ate_test::TempDir dir;
  const CliFixture fx(dir, 60, 20);
  const std::string out_dir = dir.file("runs");
  const CmdResult r = run_cli("train --train " + fx.train_jsonl + " --test " + fx.test_jsonl +
                                  " --vectors " + fx.vectors +
                                  " --name syn --method Wo-LSTM --seed 3 --max-epochs 2"
                                  " --word-hidden 12 --out-dir " +
                                  out_dir,
                              dir, "train");
  CHECK(r.status == 0);
  CHECK(r.out.find("method=Wo-LSTM") != std::string::npos);

  std::ifstream runs(out_dir + "/runs.jsonl");
  REQUIRE(runs);
  const auto records = ate::read_run_records(runs);
  REQUIRE(records.size() == 1);
  CHECK(records[0].embedding == "syn");
  CHECK(records[0].method == "Wo-LSTM");
  CHECK(records[0].seed == 3);
  CHECK(records[0].epochs_ran == 2);
  CHECK(records[0].best_epoch >= 1);

  // The saved model rescoring the same test set reproduces the record.
  const std::string base = out_dir + "/syn_Wo-LSTM_s3";
  const CmdResult ev = run_cli("eval --model " + base + ".meta.json --checkpoint " + base +
                                   ".ckpt --data " + fx.test_jsonl + " --out " +
                                   dir.file("eval.json"),
                               dir, "eval");
  CHECK(ev.status == 0);
  const auto j = nlohmann::json::parse(slurp(dir.file("eval.json")));
  CHECK(j.at("f1").get<double>() == doctest::Approx(records[0].test_f1).epsilon(1e-12));
  CHECK(j.at("precision").get<double>() ==
        doctest::Approx(records[0].test_precision).epsilon(1e-12));
  CHECK(j.at("iob_violations").get<long>() == records[0].iob_violations);
}

TEST_CASE("cli: grid executes a plan and resumes by skipping finished cells") {
  const ate_test::TempDir dir;
  const CliFixture fx(dir, 50, 15);
  const std::string out_dir = dir.file("grid");
  nlohmann::json plan;
  plan["train"] = fx.train_jsonl;
  plan["test"] = fx.test_jsonl;
  plan["out_dir"] = out_dir;
  plan["seeds"] = {1};
  plan["embeddings"] = nlohmann::json::array(
      {nlohmann::json{{"name", "syn"}, {"vectors", fx.vectors}}});
  plan["methods"] = {"Wo-LSTM", "Wo-LSTM-CRF"};
  plan["config"] = {{"max_epochs", 1}, {"word_hidden", 10}};
  {
    std::ofstream out(dir.file("plan.json"));
    out << plan.dump(2);
  }

  const CmdResult first = run_cli("grid --plan " + dir.file("plan.json") + " --workers 2", dir,
                                  "grid1");
  CHECK(first.status == 0);
  CHECK(first.out.find("2 run(s) executed") != std::string::npos);
  {
    std::ifstream runs(out_dir + "/runs.jsonl");
    REQUIRE(runs);
    const auto records = ate::read_run_records(runs);
    REQUIRE(records.size() == 2);
    CHECK(records[0].embedding == "syn");
  }

  const CmdResult second = run_cli("grid --plan " + dir.file("plan.json"), dir, "grid2");
  CHECK(second.status == 0);
  CHECK(second.err.find("skipping 2") != std::string::npos);
  {
    std::ifstream runs(out_dir + "/runs.jsonl");
    const auto records = ate::read_run_records(runs);
    CHECK(records.size() == 2);  // resume added nothing
  }
}

TEST_CASE("cli: stats ranks a published matrix and aggregated run records") {
  const ate_test::TempDir dir;
  const CmdResult r = run_cli("stats --matrix " + g_data_dir +
                                  "/scores_restaurants.csv --out " + dir.file("report.json"),
                              dir, "stats");
  CHECK(r.status == 0);
  const auto j = nlohmann::json::parse(slurp(dir.file("report.json")));
  CHECK(j.at("treatments").size() == 8);
  CHECK(j.at("blocks").size() == 11);
  CHECK(j.at("p_value").get<double>() < 0.05);

  // Aggregation path: records for a 2x2 grid collapse into a matrix first.
  std::vector<ate::RunRecord> records;
  const auto rec = [](const char* emb, const char* m, std::uint64_t seed, double f1) {
    ate::RunRecord r;
    r.embedding = emb;
    r.method = m;
    r.seed = seed;
    r.test_f1 = f1;
    return r;
  };
  records.push_back(rec("e1", "m1", 1, 80.0));
  records.push_back(rec("e1", "m1", 2, 82.0));
  records.push_back(rec("e1", "m2", 1, 70.0));
  records.push_back(rec("e2", "m1", 1, 60.0));
  records.push_back(rec("e2", "m2", 1, 50.0));
  {
    std::ofstream out(dir.file("runs.jsonl"));
    ate::write_run_records(out, records);
  }
  const CmdResult agg = run_cli("stats --runs " + dir.file("runs.jsonl") + " --write-matrix " +
                                    dir.file("matrix.csv") + " --out " + dir.file("agg.json"),
                                dir, "agg");
  CHECK(agg.status == 0);
  const auto aj = nlohmann::json::parse(slurp(dir.file("agg.json")));
  CHECK(aj.at("treatments").get<std::vector<std::string>>() ==
        std::vector<std::string>{"m1", "m2"});
  std::ifstream mcsv(dir.file("matrix.csv"));
  const ate::ResultMatrix m = ate::read_result_csv(mcsv);
  CHECK(m.means(0, 0) == doctest::Approx(81.0));
  CHECK(m.means(1, 1) == doctest::Approx(50.0));

  // Degenerate aggregation (single block) fails loudly, not silently.
  {
    std::ofstream out(dir.file("one.jsonl"));
    ate::write_run_records(out, {rec("e1", "m1", 1, 80.0), rec("e1", "m2", 1, 70.0)});
  }
  const CmdResult bad = run_cli("stats --runs " + dir.file("one.jsonl"), dir, "one");
  CHECK(bad.status == 1);
  CHECK(bad.err.rfind("error: ", 0) == 0);
}

TEST_CASE("cli: missing model files surface as errors") {
  const ate_test::TempDir dir;
  const CmdResult r = run_cli("eval --model " + dir.file("no.json") + " --checkpoint " +
                                  dir.file("no.ckpt") + " --data " + dir.file("no.jsonl"),
                              dir, "noeval");
  CHECK(r.status == 1);
  CHECK(r.err.rfind("error: ", 0) == 0);
}

int run_all(int argc, char** argv) {
  doctest::Context context;
  std::vector<const char*> forwarded;
  for (int i = 0; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--ate-bin" && i + 1 < argc) {
      g_ate_bin = argv[++i];
    } else if (arg == "--data-dir" && i + 1 < argc) {
      g_data_dir = argv[++i];
    } else {
      forwarded.push_back(argv[i]);
    }
  }
  context.applyCommandLine(static_cast<int>(forwarded.size()), forwarded.data());
  if (g_ate_bin.empty() || g_data_dir.empty()) {
    std::fprintf(stderr, "usage: cli_tests --ate-bin <path> --data-dir <path>\n");
    return 2;
  }
  return context.run();
}

int main(int argc, char** argv) { return run_all(argc, argv); }
