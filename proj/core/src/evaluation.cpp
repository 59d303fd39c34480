#include "ate/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace ate {

namespace {

long intersection_size(std::vector<AspectSpan> a, std::vector<AspectSpan> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  long hits = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia == *ib) {
      ++hits;
      ++ia;
      ++ib;
    } else if (*ia < *ib) {
      ++ia;
    } else {
      ++ib;
    }
  }
  return hits;
}

}  // namespace

PrfScores exact_f1(const std::vector<std::vector<AspectSpan>>& gold,
                   const std::vector<std::vector<AspectSpan>>& pred) {
  if (gold.size() != pred.size()) {
    throw ContractError("exact_f1: gold covers " + std::to_string(gold.size()) +
                        " sentences but predictions cover " + std::to_string(pred.size()));
  }
  PrfScores s;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const long hits = intersection_size(gold[i], pred[i]);
    s.confusion.tp += hits;
    s.confusion.fp += static_cast<long>(pred[i].size()) - hits;
    s.confusion.fn += static_cast<long>(gold[i].size()) - hits;
  }
  const long tp = s.confusion.tp;
  s.precision = tp + s.confusion.fp > 0
                    ? static_cast<double>(tp) / static_cast<double>(tp + s.confusion.fp)
                    : 0.0;
  s.recall = tp + s.confusion.fn > 0
                 ? static_cast<double>(tp) / static_cast<double>(tp + s.confusion.fn)
                 : 0.0;
  s.f1 = s.precision + s.recall > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

double gain(double m1, double m2) {
  if (m1 < 0.0 || m1 >= 100.0) {
    throw ContractError("gain: baseline must lie in [0, 100), got " + std::to_string(m1));
  }
  return (m2 - m1) / (100.0 - m1) * 100.0;
}

namespace {

nlohmann::ordered_json to_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["embedding"] = r.embedding;
  j["method"] = r.method;
  j["seed"] = r.seed;
  j["epochs_ran"] = r.epochs_ran;
  j["best_epoch"] = r.best_epoch;
  j["val_f1"] = r.val_f1;
  j["test_precision"] = r.test_precision;
  j["test_recall"] = r.test_recall;
  j["test_f1"] = r.test_f1;
  j["test_f1_raw"] = r.test_f1_raw;
  j["iob_violations"] = r.iob_violations;
  return j;
}

RunRecord from_json(const nlohmann::json& j) {
  RunRecord r;
  r.embedding = j.at("embedding").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.epochs_ran = j.at("epochs_ran").get<int>();
  r.best_epoch = j.at("best_epoch").get<int>();
  r.val_f1 = j.at("val_f1").get<double>();
  r.test_precision = j.at("test_precision").get<double>();
  r.test_recall = j.at("test_recall").get<double>();
  r.test_f1 = j.at("test_f1").get<double>();
  r.test_f1_raw = j.at("test_f1_raw").get<double>();
  r.iob_violations = j.at("iob_violations").get<long>();
  return r;
}

}  // namespace

void write_run_records(std::ostream& out, const std::vector<RunRecord>& records) {
  for (const RunRecord& r : records) {
    out << to_json(r).dump() << '\n';
  }
}

std::vector<RunRecord> read_run_records(std::istream& in) {
  std::vector<RunRecord> records;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      records.push_back(from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("run records line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

std::vector<CellResult> aggregate(const std::vector<RunRecord>& records) {
  if (records.empty()) {
    throw ContractError("aggregate: no run records");
  }
  std::vector<CellResult> cells;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const RunRecord& r : records) {
    const auto key = std::make_pair(r.embedding, r.method);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, cells.size()).first;
      cells.push_back(CellResult{r.embedding, r.method, {}, 0.0, 0.0});
    }
    cells[it->second].f1_runs.push_back(r.test_f1);
  }
  for (CellResult& c : cells) {
    const auto n = static_cast<double>(c.f1_runs.size());
    double sum = 0.0;
    for (const double x : c.f1_runs) {
      sum += x;
    }
    c.mean = sum / n;
    if (c.f1_runs.size() > 1) {
      double sq = 0.0;
      for (const double x : c.f1_runs) {
        sq += (x - c.mean) * (x - c.mean);
      }
      c.stddev = std::sqrt(sq / (n - 1.0));
    }
  }
  return cells;
}

namespace {

int label_index(std::vector<std::string>& labels, const std::string& label) {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it != labels.end()) {
    return static_cast<int>(it - labels.begin());
  }
  labels.push_back(label);
  return static_cast<int>(labels.size()) - 1;
}

constexpr const char* kPlusMinus = "±";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

ResultMatrix make_result_matrix(const std::vector<CellResult>& cells) {
  if (cells.empty()) {
    throw ContractError("make_result_matrix: no cells");
  }
  ResultMatrix m;
  for (const CellResult& c : cells) {
    label_index(m.embeddings, c.embedding);
    label_index(m.methods, c.method);
  }
  const auto rows = static_cast<Eigen::Index>(m.embeddings.size());
  const auto cols = static_cast<Eigen::Index>(m.methods.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  m.means = Mat::Constant(rows, cols, nan);
  m.stds = Mat::Constant(rows, cols, nan);
  for (const CellResult& c : cells) {
    const int r = label_index(m.embeddings, c.embedding);
    const int col = label_index(m.methods, c.method);
    if (!std::isnan(m.means(r, col))) {
      throw ContractError("make_result_matrix: duplicate cell " + c.embedding + "/" + c.method);
    }
    m.means(r, col) = c.mean;
    m.stds(r, col) = c.stddev;
  }
  return m;
}

void write_result_csv(std::ostream& out, const ResultMatrix& m) {
  out << "embedding";
  for (const std::string& method : m.methods) {
    out << ',' << method;
  }
  out << '\n';
  char buf[80];
  for (Eigen::Index r = 0; r < m.means.rows(); ++r) {
    out << m.embeddings[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < m.means.cols(); ++c) {
      out << ',';
      if (!std::isnan(m.means(r, c))) {
        std::snprintf(buf, sizeof buf, "%.4f%s%.4f", m.means(r, c), kPlusMinus,
                      std::isnan(m.stds(r, c)) ? 0.0 : m.stds(r, c));
        out << buf;
      }
    }
    out << '\n';
  }
}

ResultMatrix read_result_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("result csv: empty input");
  }
  std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 2) {
    throw ParseError("result csv: header needs at least one method column");
  }
  ResultMatrix m;
  m.methods.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> mean_rows;
  std::vector<std::vector<double>> std_rows;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError("result csv line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    m.embeddings.push_back(fields[0]);
    std::vector<double> means;
    std::vector<double> stds;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const std::string& cell = fields[i];
      if (cell.empty()) {
        means.push_back(nan);
        stds.push_back(nan);
        continue;
      }
      const std::size_t pm = cell.find(kPlusMinus);
      const std::string mean_part = pm == std::string::npos ? cell : cell.substr(0, pm);
      const std::string std_part =
          pm == std::string::npos ? "" : cell.substr(pm + std::string(kPlusMinus).size());
      char* end = nullptr;
      const double mean = std::strtod(mean_part.c_str(), &end);
      if (end == mean_part.c_str()) {
        throw ParseError("result csv line " + std::to_string(line_no) + ": bad cell '" + cell +
                         "'");
      }
      means.push_back(mean);
      stds.push_back(std_part.empty() ? 0.0 : std::strtod(std_part.c_str(), nullptr));
    }
    mean_rows.push_back(std::move(means));
    std_rows.push_back(std::move(stds));
  }
  if (mean_rows.empty()) {
    throw ParseError("result csv: no data rows");
  }
  const auto rows = static_cast<Eigen::Index>(mean_rows.size());
  const auto cols = static_cast<Eigen::Index>(m.methods.size());
  m.means.resize(rows, cols);
  m.stds.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m.means(r, c) = mean_rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      m.stds(r, c) = std_rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
  }
  return m;
}

}  // namespace ate
