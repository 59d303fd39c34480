#include "ate/embeddings.hpp"

#include <zlib.h>

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include "ate/rng.hpp"
#include "ate/text.hpp"

namespace ate {

namespace {

// zlib reads gzip members and plain files alike, so one path serves both.
std::string read_possibly_gzipped(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) {
    throw ParseError("cannot open " + path);
  }
  std::string content;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof buf)) > 0) {
    content.append(buf, static_cast<std::size_t>(n));
  }
  if (n < 0) {
    int errnum = 0;
    const char* msg = gzerror(f, &errnum);
    std::string err(msg != nullptr ? msg : "read error");
    gzclose(f);
    throw ParseError(path + ": " + err);
  }
  gzclose(f);
  return content;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream in(line);
  std::string field;
  while (in >> field) {
    fields.push_back(std::move(field));
  }
  return fields;
}

bool parse_double(const std::string& s, double* out) {
  char* end = nullptr;
  *out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && !s.empty();
}

bool is_nonneg_integer(const std::string& s) {
  if (s.empty()) {
    return false;
  }
  for (const char c : s) {
    if (std::isdigit(static_cast<unsigned char>(c)) == 0) {
      return false;
    }
  }
  return true;
}

std::string path_basename(const std::string& path) {
  const std::size_t slash = path.find_last_of('/');
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  if (base.size() > 3 && base.ends_with(".gz")) {
    base.resize(base.size() - 3);
  }
  return base;
}

}  // namespace

EmbeddingTable load_vectors(const std::string& path, std::optional<int> expected_dim) {
  const std::string content = read_possibly_gzipped(path);
  EmbeddingTable table;
  table.name = path_basename(path);

  std::istringstream in(content);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    std::vector<std::string> fields = split_ws(line);
    if (first) {
      first = false;
      if (fields.size() == 2 && is_nonneg_integer(fields[0]) && is_nonneg_integer(fields[1])) {
        table.dim = std::atoi(fields[1].c_str());
        if (table.dim <= 0) {
          throw ParseError(path + ": header declares dimension 0");
        }
        continue;
      }
    }
    if (fields.empty()) {
      continue;
    }
    if (table.dim == 0) {
      if (fields.size() < 2) {
        ++table.skipped_lines;
        continue;
      }
      table.dim = static_cast<int>(fields.size()) - 1;
    }
    if (static_cast<int>(fields.size()) != table.dim + 1) {
      ++table.skipped_lines;
      continue;
    }
    Vec v(table.dim);
    bool ok = true;
    for (int i = 0; i < table.dim; ++i) {
      if (!parse_double(fields[i + 1], &v[i])) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      ++table.skipped_lines;
      continue;
    }
    // Keep the first occurrence of a word; later duplicates are malformed.
    if (!table.vectors.emplace(std::move(fields[0]), std::move(v)).second) {
      ++table.skipped_lines;
    }
  }
  if (table.dim == 0) {
    throw ParseError(path + ": no vector lines found");
  }
  if (expected_dim.has_value() && *expected_dim != table.dim) {
    throw ParseError(path + ": dimension " + std::to_string(table.dim) + " where " +
                     std::to_string(*expected_dim) + " was expected");
  }
  if (table.skipped_lines > 0) {
    std::cerr << "warning: " << path << ": skipped " << table.skipped_lines
              << " malformed line(s)\n";
  }
  return table;
}

const Vec* lookup(const EmbeddingTable& table, const std::string& word) {
  auto it = table.vectors.find(word);
  if (it != table.vectors.end()) {
    return &it->second;
  }
  it = table.vectors.find(fold_case(word));
  return it == table.vectors.end() ? nullptr : &it->second;
}

CoverageReport coverage(
    const EmbeddingTable& table,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& subsets) {
  CoverageReport report;
  report.embedding = table.name;
  double sum = 0.0;
  for (const auto& [name, types] : subsets) {
    if (types.empty()) {
      throw ContractError("coverage: subset '" + name + "' has no word types");
    }
    CoverageSubset s;
    s.name = name;
    s.n_types = static_cast<long>(types.size());
    for (const std::string& t : types) {
      if (lookup(table, t) == nullptr) {
        ++s.n_missing;
      }
    }
    s.missing_fraction = static_cast<double>(s.n_missing) / static_cast<double>(s.n_types);
    sum += s.missing_fraction;
    report.subsets.push_back(std::move(s));
  }
  if (!report.subsets.empty()) {
    report.average_missing_fraction = sum / static_cast<double>(report.subsets.size());
  }
  return report;
}

std::vector<std::string> word_types(const std::vector<Sentence>& sentences) {
  std::vector<std::string> types;
  std::unordered_set<std::string> seen;
  for (const Sentence& s : sentences) {
    for (const Token& t : s.tokens) {
      std::string folded = fold_case(t.surface);
      if (seen.insert(folded).second) {
        types.push_back(std::move(folded));
      }
    }
  }
  return types;
}

void write_coverage_csv(std::ostream& out, const std::vector<CoverageReport>& reports) {
  out << "embedding,subset,pct_missing\n";
  char buf[32];
  for (const CoverageReport& r : reports) {
    for (const CoverageSubset& s : r.subsets) {
      std::snprintf(buf, sizeof buf, "%.4f", 100.0 * s.missing_fraction);
      out << r.embedding << ',' << s.name << ',' << buf << '\n';
    }
    std::snprintf(buf, sizeof buf, "%.4f", 100.0 * r.average_missing_fraction);
    out << r.embedding << ",average," << buf << '\n';
  }
}

Vocabulary::Vocabulary() {
  words_ = {kPadToken, kUnkToken};
  index_ = {{kPadToken, kPad}, {kUnkToken, kUnk}};
}

Vocabulary Vocabulary::build(const std::vector<Sentence>& sentences) {
  Vocabulary v;
  for (const Sentence& s : sentences) {
    for (const Token& t : s.tokens) {
      v.add(fold_case(t.surface));
    }
  }
  return v;
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& words) {
  if (words.size() < 2 || words[0] != kPadToken || words[1] != kUnkToken) {
    throw ContractError("Vocabulary: serialized word list must start with the reserved entries");
  }
  Vocabulary v;
  for (std::size_t i = 2; i < words.size(); ++i) {
    const int before = v.size();
    if (v.add(words[i]) != before) {
      throw ContractError("Vocabulary: duplicate word '" + words[i] + "' in serialized list");
    }
  }
  return v;
}

int Vocabulary::add(const std::string& folded_word) {
  const auto it = index_.find(folded_word);
  if (it != index_.end()) {
    return it->second;
  }
  const int id = size();
  words_.push_back(folded_word);
  index_.emplace(folded_word, id);
  return id;
}

int Vocabulary::lookup(const std::string& word) const {
  const auto it = index_.find(fold_case(word));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::word(int index) const {
  if (index < 0 || index >= size()) {
    throw ContractError("Vocabulary: index out of range");
  }
  return words_[static_cast<std::size_t>(index)];
}

Mat build_matrix(const EmbeddingTable& table, const Vocabulary& vocab, std::uint64_t seed) {
  if (table.dim <= 0) {
    throw ContractError("build_matrix: table has no dimension");
  }
  Mat m(vocab.size(), table.dim);
  Rng rng(seed);
  m.row(Vocabulary::kPad).setZero();
  for (int i = 1; i < vocab.size(); ++i) {
    const Vec* v = lookup(table, vocab.word(i));
    if (v != nullptr) {
      m.row(i) = v->transpose();
    } else {
      for (int d = 0; d < table.dim; ++d) {
        m(i, d) = rng.uniform(-0.25, 0.25);
      }
    }
  }
  return m;
}

}  // namespace ate
