// Command-line front end: ingest corpora, compute embedding coverage, train
// single cells or a whole ablation grid, evaluate checkpoints, and run the
// rank statistics over a result matrix.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ate/corpus.hpp"
#include "ate/embeddings.hpp"
#include "ate/evaluation.hpp"
#include "ate/rank_stats.hpp"
#include "ate/tagger.hpp"

namespace fs = std::filesystem;

namespace {

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

std::string sanitize_filename(const std::string& name) {
  std::string out;
  for (const char c : name) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '.' || c == '-' || c == '_';
    out += keep ? c : '_';
  }
  return out;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) {
    std::cerr << "warning: " << w << '\n';
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw ate::ParseError("cannot open " + path + " for writing");
  }
  return out;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  std::string xml_path;
  std::string out_path;
};

void cmd_ingest(const IngestArgs& args) {
  std::vector<std::string> warnings;
  const std::vector<ate::RawSentence> raw = ate::parse_semeval_xml_file(args.xml_path, &warnings);
  std::vector<ate::Sentence> sentences;
  sentences.reserve(raw.size());
  for (const ate::RawSentence& r : raw) {
    sentences.push_back(ate::ingest_sentence(r, &warnings));
  }
  print_warnings(warnings);
  const ate::DatasetProfile profile = ate::profile(sentences);
  std::ofstream out = open_out(args.out_path);
  ate::write_jsonl(out, sentences);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", profile.multi_aspect_fraction);
  std::cout << "sentences=" << profile.n_sentences << '\n'
            << "aspects=" << profile.n_aspects << '\n'
            << "unique_aspects=" << profile.n_unique_aspects << '\n'
            << "multi_aspect_fraction=" << buf << '\n';
}

// ---------------------------------------------------------------------------
// coverage

struct CoverageArgs {
  std::string vectors_path;
  std::string embedding_name;
  std::vector<std::string> data_paths;
  std::string out_path;
};

void cmd_coverage(const CoverageArgs& args) {
  ate::EmbeddingTable table = ate::load_vectors(args.vectors_path);
  if (!args.embedding_name.empty()) {
    table.name = args.embedding_name;
  }
  std::vector<std::pair<std::string, std::vector<std::string>>> subsets;
  for (const std::string& path : args.data_paths) {
    subsets.emplace_back(stem_of(path), ate::word_types(ate::read_jsonl_file(path)));
  }
  const ate::CoverageReport report = ate::coverage(table, subsets);
  if (args.out_path.empty()) {
    ate::write_coverage_csv(std::cout, {report});
  } else {
    std::ofstream out = open_out(args.out_path);
    ate::write_coverage_csv(out, {report});
  }
}

// ---------------------------------------------------------------------------
// train / grid shared machinery

struct HyperArgs {
  int word_hidden = -1;
  int char_dim = -1;
  int char_hidden = -1;
  double dropout = -1.0;
  int batch_size = -1;
  int max_len = -1;
  int max_epochs = -1;
  int patience = -1;
  double val_fraction = -1.0;
  bool train_embeddings = false;

  void apply(ate::TaggerConfig& cfg) const {
    if (word_hidden >= 0) cfg.word_hidden = word_hidden;
    if (char_dim >= 0) cfg.char_dim = char_dim;
    if (char_hidden >= 0) cfg.char_hidden = char_hidden;
    if (dropout >= 0.0) cfg.dropout = dropout;
    if (batch_size >= 0) cfg.batch_size = batch_size;
    if (max_len >= 0) cfg.max_len = max_len;
    if (max_epochs >= 0) cfg.max_epochs = max_epochs;
    if (patience >= 0) cfg.patience = patience;
    if (val_fraction >= 0.0) cfg.val_fraction = val_fraction;
    if (train_embeddings) cfg.train_embeddings = true;
  }

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--word-hidden", word_hidden, "Word-level LSTM hidden size");
    cmd->add_option("--char-dim", char_dim, "Character embedding size");
    cmd->add_option("--char-hidden", char_hidden, "Character LSTM hidden size");
    cmd->add_option("--dropout", dropout, "Dropout rate in [0, 1)");
    cmd->add_option("--batch-size", batch_size, "Mini-batch size");
    cmd->add_option("--max-len", max_len, "Training-time sentence truncation length");
    cmd->add_option("--max-epochs", max_epochs, "Maximum training epochs");
    cmd->add_option("--patience", patience, "Early-stopping patience in epochs");
    cmd->add_option("--val-fraction", val_fraction, "Validation share of the train set");
    cmd->add_flag("--train-embeddings", train_embeddings,
                  "Fine-tune word vectors instead of freezing them");
  }
};

struct RunOutcome {
  ate::RunRecord record;
  ate::TrainLog log;
};

RunOutcome run_cell(const ate::EmbeddingTable& table, const std::string& method,
                    std::uint64_t seed, const HyperArgs& hyper,
                    const std::vector<ate::Sentence>& train_set,
                    const std::vector<ate::Sentence>& test_set, const std::string& out_dir) {
  ate::TaggerConfig cfg = ate::TaggerConfig::from_method(method);
  hyper.apply(cfg);
  cfg.seed = seed;
  cfg.embedding_name = table.name;

  const ate::Vocabulary vocab = ate::Vocabulary::build(train_set);
  const ate::Charset charset = ate::build_charset(train_set);
  ate::TaggerModel model = ate::TaggerModel::build(cfg, table, vocab, charset, seed);
  const ate::TrainLog log = ate::train(model, train_set);
  const ate::TaggerEval eval = ate::evaluate_tagger(model, test_set);

  ate::RunRecord record;
  record.embedding = table.name;
  record.method = method;
  record.seed = seed;
  record.epochs_ran = log.stopped_epoch;
  record.best_epoch = log.best_epoch;
  record.val_f1 = log.best_val_f1;
  record.test_precision = 100.0 * eval.precision;
  record.test_recall = 100.0 * eval.recall;
  record.test_f1 = 100.0 * eval.f1;
  record.test_f1_raw = 100.0 * eval.f1_raw;
  record.iob_violations = eval.iob_violations;

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    const std::string base = sanitize_filename(table.name) + "_" + sanitize_filename(method) +
                             "_s" + std::to_string(seed);
    model.save((fs::path(out_dir) / (base + ".meta.json")).string(),
               (fs::path(out_dir) / (base + ".ckpt")).string());
  }
  return RunOutcome{record, log};
}

void append_records(const std::string& path, const std::vector<ate::RunRecord>& records) {
  std::ofstream out(path, std::ios::app);
  if (!out) {
    throw ate::ParseError("cannot open " + path + " for writing");
  }
  ate::write_run_records(out, records);
  out.flush();
}

std::vector<ate::RunRecord> read_records_if_present(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    return {};
  }
  return ate::read_run_records(in);
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string train_path;
  std::string test_path;
  std::string vectors_path;
  std::string embedding_name;
  std::string method;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  HyperArgs hyper;
};

void cmd_train(const TrainArgs& args) {
  ate::EmbeddingTable table = ate::load_vectors(args.vectors_path);
  if (!args.embedding_name.empty()) {
    table.name = args.embedding_name;
  }
  const std::vector<ate::Sentence> train_set = ate::read_jsonl_file(args.train_path);
  const std::vector<ate::Sentence> test_set = ate::read_jsonl_file(args.test_path);
  const RunOutcome outcome =
      run_cell(table, args.method, args.seed, args.hyper, train_set, test_set, args.out_dir);
  append_records((fs::path(args.out_dir) / "runs.jsonl").string(), {outcome.record});
  const ate::RunRecord& r = outcome.record;
  std::cout << "embedding=" << r.embedding << " method=" << r.method << " seed=" << r.seed
            << " epochs=" << r.epochs_ran << " best_epoch=" << r.best_epoch << " val_f1="
            << r.val_f1 << " test_f1=" << r.test_f1 << " iob_violations=" << r.iob_violations
            << '\n';
}

// ---------------------------------------------------------------------------
// grid

struct GridArgs {
  std::string plan_path;
  int workers = 1;
};

struct PlanEmbedding {
  std::string name;
  std::string vectors;
};

struct Plan {
  std::string train_path;
  std::string test_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  std::vector<PlanEmbedding> embeddings;
  std::vector<std::string> methods;
  HyperArgs hyper;
};

Plan read_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ate::ParseError("cannot open " + path);
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ate::ParseError(path + ": " + e.what());
  }
  Plan plan;
  plan.train_path = j.at("train").get<std::string>();
  plan.test_path = j.at("test").get<std::string>();
  plan.out_dir = j.value("out_dir", "grid-out");
  plan.seeds = j.value("seeds", std::vector<std::uint64_t>{1, 2, 3, 4, 5, 6});
  if (plan.seeds.empty()) {
    throw ate::ContractError("plan: seeds must be non-empty");
  }
  for (const auto& e : j.at("embeddings")) {
    plan.embeddings.push_back({e.at("name").get<std::string>(), e.at("vectors").get<std::string>()});
  }
  plan.methods = j.at("methods").get<std::vector<std::string>>();
  for (const std::string& m : plan.methods) {
    ate::TaggerConfig::from_method(m);  // validates, listing legal names
  }
  for (std::size_t i = 0; i < plan.embeddings.size(); ++i) {
    for (std::size_t k = i + 1; k < plan.embeddings.size(); ++k) {
      if (plan.embeddings[i].name == plan.embeddings[k].name) {
        throw ate::ContractError("plan: duplicate embedding '" + plan.embeddings[i].name + "'");
      }
    }
  }
  for (std::size_t i = 0; i < plan.methods.size(); ++i) {
    for (std::size_t k = i + 1; k < plan.methods.size(); ++k) {
      if (plan.methods[i] == plan.methods[k]) {
        throw ate::ContractError("plan: duplicate method '" + plan.methods[i] + "'");
      }
    }
  }
  if (j.contains("config")) {
    const nlohmann::json& c = j.at("config");
    plan.hyper.word_hidden = c.value("word_hidden", -1);
    plan.hyper.char_dim = c.value("char_dim", -1);
    plan.hyper.char_hidden = c.value("char_hidden", -1);
    plan.hyper.dropout = c.value("dropout", -1.0);
    plan.hyper.batch_size = c.value("batch_size", -1);
    plan.hyper.max_len = c.value("max_len", -1);
    plan.hyper.max_epochs = c.value("max_epochs", -1);
    plan.hyper.patience = c.value("patience", -1);
    plan.hyper.val_fraction = c.value("val_fraction", -1.0);
    plan.hyper.train_embeddings = c.value("train_embeddings", false);
  }
  return plan;
}

void cmd_grid(const GridArgs& args) {
  const Plan plan = read_plan(args.plan_path);
  const std::vector<ate::Sentence> train_set = ate::read_jsonl_file(plan.train_path);
  const std::vector<ate::Sentence> test_set = ate::read_jsonl_file(plan.test_path);

  std::vector<ate::EmbeddingTable> tables;
  tables.reserve(plan.embeddings.size());
  for (const PlanEmbedding& e : plan.embeddings) {
    tables.push_back(ate::load_vectors(e.vectors));
    tables.back().name = e.name;
  }

  fs::create_directories(plan.out_dir);
  const std::string runs_path = (fs::path(plan.out_dir) / "runs.jsonl").string();
  const std::vector<ate::RunRecord> existing = read_records_if_present(runs_path);
  const auto already_done = [&existing](const std::string& emb, const std::string& method,
                                        std::uint64_t seed) {
    for (const ate::RunRecord& r : existing) {
      if (r.embedding == emb && r.method == method && r.seed == seed) {
        return true;
      }
    }
    return false;
  };

  struct Item {
    std::size_t table_idx;
    std::string method;
    std::uint64_t seed;
  };
  std::vector<Item> items;
  std::size_t skipped = 0;
  for (std::size_t t = 0; t < tables.size(); ++t) {
    for (const std::string& method : plan.methods) {
      for (const std::uint64_t seed : plan.seeds) {
        if (already_done(tables[t].name, method, seed)) {
          ++skipped;
        } else {
          items.push_back({t, method, seed});
        }
      }
    }
  }
  if (skipped > 0) {
    std::cerr << "grid: skipping " << skipped << " completed run(s) found in " << runs_path
              << '\n';
  }

  // Workers pull items off a shared counter and own one model end to end;
  // only this (main) thread touches the runs file.
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::condition_variable cv;
  std::deque<ate::RunRecord> finished;
  std::size_t n_done = 0;
  std::exception_ptr failure;

  const auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size()) {
        return;
      }
      const Item& item = items[i];
      try {
        RunOutcome outcome = run_cell(tables[item.table_idx], item.method, item.seed, plan.hyper,
                                      train_set, test_set, plan.out_dir);
        std::lock_guard<std::mutex> lock(mu);
        finished.push_back(std::move(outcome.record));
        ++n_done;
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (failure == nullptr) {
          failure = std::current_exception();
        }
        next.store(items.size());  // stop handing out work
        ++n_done;
      }
      cv.notify_one();
    }
  };

  const int n_workers = std::max(1, std::min<int>(args.workers, static_cast<int>(items.size())));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(n_workers));
  for (int i = 0; i < n_workers; ++i) {
    threads.emplace_back(worker);
  }
  {
    std::unique_lock<std::mutex> lock(mu);
    std::size_t seen = 0;
    while (seen < items.size()) {
      cv.wait(lock, [&] { return !finished.empty() || n_done >= items.size(); });
      while (!finished.empty()) {
        const ate::RunRecord record = std::move(finished.front());
        finished.pop_front();
        lock.unlock();
        append_records(runs_path, {record});
        std::cout << record.embedding << ' ' << record.method << " seed=" << record.seed
                  << " test_f1=" << record.test_f1 << '\n';
        lock.lock();
        ++seen;
      }
      if (n_done >= items.size() && finished.empty()) {
        break;
      }
    }
  }
  for (std::thread& t : threads) {
    t.join();
  }
  if (failure != nullptr) {
    std::rethrow_exception(failure);
  }
  std::cout << "grid: " << items.size() << " run(s) executed, " << skipped << " skipped\n";
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string meta_path;
  std::string checkpoint_path;
  std::string data_path;
  std::string out_path;
};

void cmd_eval(const EvalArgs& args) {
  const ate::TaggerModel model = ate::TaggerModel::load(args.meta_path, args.checkpoint_path);
  const std::vector<ate::Sentence> data = ate::read_jsonl_file(args.data_path);
  const ate::TaggerEval eval = ate::evaluate_tagger(model, data);
  nlohmann::ordered_json j;
  j["precision"] = 100.0 * eval.precision;
  j["recall"] = 100.0 * eval.recall;
  j["f1"] = 100.0 * eval.f1;
  j["f1_raw"] = 100.0 * eval.f1_raw;
  j["iob_violations"] = eval.iob_violations;
  if (args.out_path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::ofstream out = open_out(args.out_path);
    out << j.dump(2) << '\n';
    std::cout << "f1=" << j["f1"].dump() << " iob_violations=" << eval.iob_violations << '\n';
  }
}

// ---------------------------------------------------------------------------
// stats

struct StatsArgs {
  std::string matrix_path;
  std::string runs_path;
  std::string write_matrix_path;
  std::string out_path;
  double alpha = 0.05;
  bool rank_embeddings = false;
};

void cmd_stats(const StatsArgs& args) {
  ate::ResultMatrix matrix;
  if (!args.matrix_path.empty()) {
    std::ifstream in(args.matrix_path);
    if (!in) {
      throw ate::ParseError("cannot open " + args.matrix_path);
    }
    matrix = ate::read_result_csv(in);
  } else {
    std::ifstream in(args.runs_path);
    if (!in) {
      throw ate::ParseError("cannot open " + args.runs_path);
    }
    matrix = ate::make_result_matrix(ate::aggregate(ate::read_run_records(in)));
  }
  if (!args.write_matrix_path.empty()) {
    std::ofstream out = open_out(args.write_matrix_path);
    ate::write_result_csv(out, matrix);
  }
  const ate::RankReport report = ate::rank_report(matrix, args.alpha, /*higher_is_better=*/true,
                                                  /*treatments_are_columns=*/!args.rank_embeddings);
  if (args.out_path.empty()) {
    ate::write_rank_report_json(std::cout, report);
  } else {
    std::ofstream out = open_out(args.out_path);
    ate::write_rank_report_json(out, report);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aspect term extraction toolkit"};
  app.require_subcommand(1);

  IngestArgs ingest_args;
  CLI::App* ingest = app.add_subcommand(
      "ingest", "Parse a SemEval ABSA XML file into tokenized, IOB-tagged JSON lines");
  ingest->add_option("xml", ingest_args.xml_path, "Input XML file")->required();
  ingest->add_option("out", ingest_args.out_path, "Output JSONL file")->required();
  ingest->callback([&] { cmd_ingest(ingest_args); });

  CoverageArgs coverage_args;
  CLI::App* coverage = app.add_subcommand(
      "coverage", "Report the word types of each dataset missing from a vector table");
  coverage->add_option("--vectors", coverage_args.vectors_path, "Vector file (text, optionally gzip)")
      ->required();
  coverage->add_option("--name", coverage_args.embedding_name, "Embedding label for the report");
  coverage->add_option("--data", coverage_args.data_paths, "Ingested JSONL dataset(s)")
      ->required()
      ->expected(-1);
  coverage->add_option("--out", coverage_args.out_path, "CSV output path (default stdout)");
  coverage->callback([&] { cmd_coverage(coverage_args); });

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train one configuration and record its scores");
  train->add_option("--train", train_args.train_path, "Training JSONL")->required();
  train->add_option("--test", train_args.test_path, "Test JSONL")->required();
  train->add_option("--vectors", train_args.vectors_path, "Vector file")->required();
  train->add_option("--name", train_args.embedding_name, "Embedding label");
  train->add_option("--method", train_args.method, "One of the eight method abbreviations")
      ->required();
  train->add_option("--seed", train_args.seed, "Run seed");
  train->add_option("--out-dir", train_args.out_dir, "Directory for runs.jsonl and checkpoints");
  train_args.hyper.add_flags(train);
  train->callback([&] { cmd_train(train_args); });

  GridArgs grid_args;
  CLI::App* grid = app.add_subcommand("grid", "Execute an experiment plan, resuming if restarted");
  grid->add_option("--plan", grid_args.plan_path, "Plan JSON file")->required();
  grid->add_option("--workers", grid_args.workers, "Parallel workers (one model each)");
  grid->callback([&] { cmd_grid(grid_args); });

  EvalArgs eval_args;
  CLI::App* evalc = app.add_subcommand("eval", "Score a saved model on a labeled dataset");
  evalc->add_option("--model", eval_args.meta_path, "Model description JSON")->required();
  evalc->add_option("--checkpoint", eval_args.checkpoint_path, "Parameter checkpoint")->required();
  evalc->add_option("--data", eval_args.data_path, "Labeled JSONL")->required();
  evalc->add_option("--out", eval_args.out_path, "JSON output path (default stdout)");
  evalc->callback([&] { cmd_eval(eval_args); });

  StatsArgs stats_args;
  CLI::App* stats = app.add_subcommand(
      "stats", "Friedman/Nemenyi rank report over a result matrix or raw run records");
  CLI::Option* m_opt = stats->add_option("--matrix", stats_args.matrix_path, "Result matrix CSV");
  stats->add_option("--runs", stats_args.runs_path, "Run-record JSONL to aggregate")
      ->excludes(m_opt);
  stats->add_option("--write-matrix", stats_args.write_matrix_path,
                    "Also write the aggregated matrix CSV here");
  stats->add_option("--alpha", stats_args.alpha, "Significance level (0.05 or 0.10)");
  stats->add_flag("--rank-embeddings", stats_args.rank_embeddings,
                  "Rank embeddings over methods instead of methods over embeddings");
  stats->add_option("--out", stats_args.out_path, "Report JSON path (default stdout)");
  stats->callback([&] {
    if (stats_args.matrix_path.empty() && stats_args.runs_path.empty()) {
      throw CLI::RequiredError("--matrix or --runs");
    }
    cmd_stats(stats_args);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
