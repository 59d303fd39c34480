#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ate/corpus.hpp"
#include "ate/types.hpp"

namespace ate {

// Pretrained word vectors loaded from a text export. Immutable after load;
// concurrent reads are safe.
struct EmbeddingTable {
  std::string name;
  int dim = 0;
  std::unordered_map<std::string, Vec> vectors;
  long skipped_lines = 0;  // wrong arity, bad numbers, duplicate words

  bool contains(const std::string& word) const { return vectors.count(word) != 0; }
};

// Reads a "word v1 ... vd" text file, optionally gzip-compressed (detected by
// content, so plain files work too). A fastText-style first line with exactly
// two integer fields is treated as a header and sets the dimension; otherwise
// the first data line does. Lines with the wrong arity or unparseable numbers
// are skipped and counted. A present `expected_dim` that disagrees with the
// inferred one is a hard error.
EmbeddingTable load_vectors(const std::string& path, std::optional<int> expected_dim = {});

// Exact match first, then the case-folded form. Null on miss.
const Vec* lookup(const EmbeddingTable& table, const std::string& word);

struct CoverageSubset {
  std::string name;
  long n_types = 0;
  long n_missing = 0;
  double missing_fraction = 0.0;
};

// Per-subset fraction of word types the table cannot resolve, plus the
// macro-average across subsets.
struct CoverageReport {
  std::string embedding;
  std::vector<CoverageSubset> subsets;
  double average_missing_fraction = 0.0;
};

// `subsets` pairs a label with that subset's word types (already case-folded,
// per the lookup policy). Empty type sets are an error.
CoverageReport coverage(const EmbeddingTable& table,
                        const std::vector<std::pair<std::string, std::vector<std::string>>>& subsets);

// Unique case-folded token types of a corpus slice, in first-seen order.
std::vector<std::string> word_types(const std::vector<Sentence>& sentences);

// CSV with columns embedding,subset,pct_missing; one extra "average" row per
// report. Fractions are written as percentages.
void write_coverage_csv(std::ostream& out, const std::vector<CoverageReport>& reports);

// Task vocabulary over case-folded words. Index 0 is padding, 1 is the
// unknown word; everything else appears in first-seen corpus order.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary();
  static Vocabulary build(const std::vector<Sentence>& sentences);
  // Rebuilds from a serialized word list; the two reserved entries must lead.
  static Vocabulary from_words(const std::vector<std::string>& words);

  int add(const std::string& folded_word);
  // kUnk for absent words. The argument is case-folded before the probe.
  int lookup(const std::string& word) const;
  int size() const { return static_cast<int>(words_.size()); }
  const std::string& word(int index) const;
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

// |vocab| x dim matrix: padding row zero, table hits copied verbatim, misses
// drawn from uniform(-0.25, 0.25) with the given seed. Deterministic in
// (table, vocab, seed).
Mat build_matrix(const EmbeddingTable& table, const Vocabulary& vocab, std::uint64_t seed);

}  // namespace ate
