#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ate/types.hpp"

namespace ate {

enum class Tag : std::uint8_t { O = 0, B = 1, I = 2 };

using TagSequence = std::vector<Tag>;

char tag_to_char(Tag t);
Tag tag_from_char(char c);

// Character-offset annotation as it appears in the SemEval XML. `from`/`to`
// are Unicode character indices into the sentence text, half-open.
struct CharSpan {
  std::string term;
  int from = 0;
  int to = 0;
};

struct RawSentence {
  std::string id;
  std::string text;  // UTF-8
  std::vector<CharSpan> aspect_spans;
};

struct Token {
  std::string surface;
  int start = 0;  // character index, half-open [start, end)
  int end = 0;
};

// Token-index annotation, inclusive on both ends.
struct AspectSpan {
  int first_token = 0;
  int last_token = 0;

  friend bool operator==(const AspectSpan&, const AspectSpan&) = default;
  friend auto operator<=>(const AspectSpan&, const AspectSpan&) = default;
};

struct Sentence {
  std::string id;
  std::vector<Token> tokens;
  TagSequence gold_tags;
};

struct DatasetProfile {
  long n_sentences = 0;
  long n_aspects = 0;
  long n_unique_aspects = 0;
  double multi_aspect_fraction = 0.0;
};

// Parses a SemEval-2014 ABSA review file. One RawSentence per <sentence>
// element; sentences without <aspectTerms> get empty span lists. XML entities
// are resolved before any offset is interpreted. Malformed XML raises
// ParseError carrying the line number. A span whose text slice does not match
// its term attribute (after whitespace normalization) is dropped with a
// warning; the sentence is kept.
std::vector<RawSentence> parse_semeval_xml(std::istream& in,
                                           std::vector<std::string>* warnings = nullptr);
std::vector<RawSentence> parse_semeval_xml_file(const std::string& path,
                                                std::vector<std::string>* warnings = nullptr);

// Whitespace split plus punctuation detachment, offsets in character units.
// Concatenating token slices and the skipped separators reconstructs the
// input exactly.
std::vector<Token> tokenize(const std::string& text);

// Maps character-offset spans onto token indices: a token belongs to a span
// iff its character range overlaps [from, to). Spans covering no token are
// dropped with a warning.
std::vector<AspectSpan> align_spans(const RawSentence& raw, const std::vector<Token>& tokens,
                                    std::vector<std::string>* warnings = nullptr);

// First token of each span tags B, the rest I, everything else O.
// Overlapping or out-of-range spans violate the corpus invariant and raise
// ContractError.
TagSequence encode_iob(int n_tokens, const std::vector<AspectSpan>& spans);

// Total inverse of encode_iob: maximal B(I)* runs become spans. Repair
// policy for invalid input: an I at position 0 or directly after O starts a
// new span, exactly as if it were B.
std::vector<AspectSpan> decode_iob(const TagSequence& tags);

// Strict inverse: only B(I)* runs become spans; an I without a preceding B
// or I belongs to no span. Used to score raw tags without crediting repairs.
std::vector<AspectSpan> decode_iob_strict(const TagSequence& tags);

// Number of positions where an I follows something other than B or I.
int iob_violation_count(const TagSequence& tags);

// Full ingest of one raw sentence: tokenize, align, encode.
Sentence ingest_sentence(const RawSentence& raw, std::vector<std::string>* warnings = nullptr);

// Corpus statistics in the shape of the SemEval dataset profile. Aspect
// uniqueness is by case-folded surface string; the multi-aspect fraction
// counts aspects spanning two or more tokens. Empty input raises.
DatasetProfile profile(const std::vector<Sentence>& dataset);

// Line-delimited JSON, one {"id", "tokens", "tags"} object per sentence.
// Byte-deterministic for identical input.
void write_jsonl(std::ostream& out, const std::vector<Sentence>& sentences);
std::vector<Sentence> read_jsonl(std::istream& in);
std::vector<Sentence> read_jsonl_file(const std::string& path);

}  // namespace ate
