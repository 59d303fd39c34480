#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ate/corpus.hpp"
#include "ate/types.hpp"

namespace ate {

struct SpanConfusion {
  long tp = 0;
  long fp = 0;
  long fn = 0;
};

struct PrfScores {
  double precision = 0.0;  // fractions in [0, 1]
  double recall = 0.0;
  double f1 = 0.0;
  SpanConfusion confusion;
};

// Micro-averaged exact-match span scores over aligned sentences: a predicted
// span counts as a true positive only when its (first_token, last_token) pair
// appears among that sentence's gold spans. F1 is 0 when P + R is.
PrfScores exact_f1(const std::vector<std::vector<AspectSpan>>& gold,
                   const std::vector<std::vector<AspectSpan>>& pred);

// Improvement of m2 over m1 as a share of the headroom above m1, in percent:
// (m2 - m1) / (100 - m1) * 100. Both inputs are F1 percentages; m1 must lie
// in [0, 100).
double gain(double m1, double m2);

// One training run's outcome. F1/precision/recall are percentages. test_f1
// scores the decoded (repaired where needed) spans and is the headline
// number; test_f1_raw scores only spans already valid in the raw tags.
struct RunRecord {
  std::string embedding;
  std::string method;
  std::uint64_t seed = 0;
  int epochs_ran = 0;
  int best_epoch = 0;
  double val_f1 = 0.0;
  double test_precision = 0.0;
  double test_recall = 0.0;
  double test_f1 = 0.0;
  double test_f1_raw = 0.0;
  // IOB violations in the raw test-set predictions, before any repair.
  long iob_violations = 0;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

// Line-delimited JSON, one record per line.
void write_run_records(std::ostream& out, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_run_records(std::istream& in);

// Mean and sample standard deviation (n - 1 denominator) of the F1 runs
// behind one (embedding, method) cell.
struct CellResult {
  std::string embedding;
  std::string method;
  std::vector<double> f1_runs;
  double mean = 0.0;
  double stddev = 0.0;
};

// Groups records by (embedding, method) in first-seen order. Empty input is
// an error; a single-run cell gets stddev 0.
std::vector<CellResult> aggregate(const std::vector<RunRecord>& records);

// Embeddings-by-methods grid of cell means (and stds), the layout consumed by
// the rank statistics and written as CSV with "mean±std" cells.
struct ResultMatrix {
  std::vector<std::string> embeddings;  // row labels
  std::vector<std::string> methods;  // column labels
  Mat means;
  Mat stds;
};

ResultMatrix make_result_matrix(const std::vector<CellResult>& cells);
void write_result_csv(std::ostream& out, const ResultMatrix& m);
// Accepts both "mean±std" and bare-mean cells; bare cells read as std 0.
ResultMatrix read_result_csv(std::istream& in);

}  // namespace ate
