#include "ate/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>

#include "ate/text.hpp"

namespace ate {

namespace pt = boost::property_tree;

char tag_to_char(Tag t) {
  switch (t) {
    case Tag::O: return 'O';
    case Tag::B: return 'B';
    case Tag::I: return 'I';
  }
  throw ContractError("tag_to_char: invalid tag");
}

Tag tag_from_char(char c) {
  switch (c) {
    case 'O': return Tag::O;
    case 'B': return Tag::B;
    case 'I': return Tag::I;
  }
  throw ParseError(std::string("unknown IOB tag letter '") + c + "'");
}

namespace {

void warn(std::vector<std::string>* warnings, std::string msg) {
  if (warnings != nullptr) {
    warnings->push_back(std::move(msg));
  }
}

}  // namespace

std::vector<RawSentence> parse_semeval_xml(std::istream& in,
                                           std::vector<std::string>* warnings) {
  pt::ptree doc;
  try {
    pt::read_xml(in, doc);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("malformed XML at line " + std::to_string(e.line()) + ": " + e.message());
  }

  const auto root = doc.get_child_optional("sentences");
  if (!root) {
    throw ParseError("malformed XML: missing <sentences> root element");
  }

  std::vector<RawSentence> out;
  for (const auto& [key, node] : *root) {
    if (key != "sentence") {
      continue;
    }
    RawSentence s;
    s.id = node.get<std::string>("<xmlattr>.id", "");
    s.text = node.get<std::string>("text", "");
    const std::u32string chars = utf8_decode(s.text);
    const int n_chars = static_cast<int>(chars.size());

    if (const auto terms = node.get_child_optional("aspectTerms")) {
      for (const auto& [tkey, tnode] : *terms) {
        if (tkey != "aspectTerm") {
          continue;
        }
        CharSpan span;
        span.term = tnode.get<std::string>("<xmlattr>.term", "");
        span.from = tnode.get<int>("<xmlattr>.from", -1);
        span.to = tnode.get<int>("<xmlattr>.to", -1);
        if (span.from < 0 || span.to <= span.from || span.to > n_chars) {
          warn(warnings, "sentence " + s.id + ": span [" + std::to_string(span.from) + "," +
                             std::to_string(span.to) + ") out of range, dropped");
          continue;
        }
        const std::string slice =
            utf8_encode(std::u32string_view(chars).substr(span.from, span.to - span.from));
        if (normalize_whitespace(slice) != normalize_whitespace(span.term)) {
          warn(warnings, "sentence " + s.id + ": slice '" + slice + "' does not match term '" +
                             span.term + "', span dropped");
          continue;
        }
        s.aspect_spans.push_back(std::move(span));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<RawSentence> parse_semeval_xml_file(const std::string& path,
                                                std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("cannot open " + path);
  }
  return parse_semeval_xml(in, warnings);
}

std::vector<Token> tokenize(const std::string& text) {
  const std::u32string chars = utf8_decode(text);
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < chars.size()) {
    if (is_space_char(chars[i])) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    if (is_word_char(chars[i])) {
      while (j < chars.size() && is_word_char(chars[j])) {
        ++j;
      }
    }
    // else: single punctuation character token
    Token t;
    t.surface = utf8_encode(std::u32string_view(chars).substr(i, j - i));
    t.start = static_cast<int>(i);
    t.end = static_cast<int>(j);
    tokens.push_back(std::move(t));
    i = j;
  }
  return tokens;
}

std::vector<AspectSpan> align_spans(const RawSentence& raw, const std::vector<Token>& tokens,
                                    std::vector<std::string>* warnings) {
  std::vector<AspectSpan> out;
  for (const CharSpan& span : raw.aspect_spans) {
    int first = -1;
    int last = -1;
    for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
      if (tokens[i].start < span.to && tokens[i].end > span.from) {
        if (first < 0) {
          first = i;
        }
        last = i;
      }
    }
    if (first < 0) {
      warn(warnings, "sentence " + raw.id + ": span '" + span.term +
                         "' overlaps no token, dropped");
      continue;
    }
    out.push_back({first, last});
  }
  return out;
}

TagSequence encode_iob(int n_tokens, const std::vector<AspectSpan>& spans) {
  std::vector<AspectSpan> sorted = spans;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& s = sorted[i];
    if (s.first_token < 0 || s.last_token < s.first_token || s.last_token >= n_tokens) {
      throw ContractError("encode_iob: span out of range");
    }
    if (i > 0 && sorted[i - 1].last_token >= s.first_token) {
      throw ContractError("encode_iob: overlapping spans");
    }
  }
  TagSequence tags(static_cast<std::size_t>(n_tokens), Tag::O);
  for (const auto& s : sorted) {
    tags[static_cast<std::size_t>(s.first_token)] = Tag::B;
    for (int i = s.first_token + 1; i <= s.last_token; ++i) {
      tags[static_cast<std::size_t>(i)] = Tag::I;
    }
  }
  return tags;
}

std::vector<AspectSpan> decode_iob(const TagSequence& tags) {
  std::vector<AspectSpan> spans;
  int open = -1;  // first token of the span being built, -1 when outside
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    switch (tags[static_cast<std::size_t>(i)]) {
      case Tag::O:
        if (open >= 0) {
          spans.push_back({open, i - 1});
          open = -1;
        }
        break;
      case Tag::B:
        if (open >= 0) {
          spans.push_back({open, i - 1});
        }
        open = i;
        break;
      case Tag::I:
        // Orphan I (at position 0 or after O) is repaired into a B.
        if (open < 0) {
          open = i;
        }
        break;
    }
  }
  if (open >= 0) {
    spans.push_back({open, static_cast<int>(tags.size()) - 1});
  }
  return spans;
}

std::vector<AspectSpan> decode_iob_strict(const TagSequence& tags) {
  std::vector<AspectSpan> spans;
  int open = -1;
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    switch (tags[static_cast<std::size_t>(i)]) {
      case Tag::O:
        if (open >= 0) {
          spans.push_back({open, i - 1});
          open = -1;
        }
        break;
      case Tag::B:
        if (open >= 0) {
          spans.push_back({open, i - 1});
        }
        open = i;
        break;
      case Tag::I:
        // An orphan I extends nothing and starts nothing.
        break;
    }
  }
  if (open >= 0) {
    spans.push_back({open, static_cast<int>(tags.size()) - 1});
  }
  return spans;
}

int iob_violation_count(const TagSequence& tags) {
  int count = 0;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] == Tag::I && (i == 0 || tags[i - 1] == Tag::O)) {
      ++count;
    }
  }
  return count;
}

Sentence ingest_sentence(const RawSentence& raw, std::vector<std::string>* warnings) {
  Sentence s;
  s.id = raw.id;
  s.tokens = tokenize(raw.text);
  std::vector<AspectSpan> spans = align_spans(raw, s.tokens, warnings);
  std::sort(spans.begin(), spans.end());
  std::vector<AspectSpan> kept;
  for (const AspectSpan& sp : spans) {
    if (!kept.empty() && kept.back().last_token >= sp.first_token) {
      if (kept.back() == sp) {
        warn(warnings, "sentence " + raw.id + ": duplicate span, dropped");
      } else {
        warn(warnings, "sentence " + raw.id + ": span overlaps a previous span, dropped");
      }
      continue;
    }
    kept.push_back(sp);
  }
  s.gold_tags = encode_iob(static_cast<int>(s.tokens.size()), kept);
  return s;
}

DatasetProfile profile(const std::vector<Sentence>& dataset) {
  if (dataset.empty()) {
    throw ContractError("profile: empty dataset");
  }
  DatasetProfile p;
  p.n_sentences = static_cast<long>(dataset.size());
  long multi = 0;
  std::set<std::string> unique;
  for (const Sentence& s : dataset) {
    for (const AspectSpan& span : decode_iob(s.gold_tags)) {
      ++p.n_aspects;
      if (span.last_token > span.first_token) {
        ++multi;
      }
      std::string surface;
      for (int i = span.first_token; i <= span.last_token; ++i) {
        if (!surface.empty()) {
          surface.push_back(' ');
        }
        surface += s.tokens[static_cast<std::size_t>(i)].surface;
      }
      unique.insert(fold_case(surface));
    }
  }
  p.n_unique_aspects = static_cast<long>(unique.size());
  p.multi_aspect_fraction =
      p.n_aspects == 0 ? 0.0 : static_cast<double>(multi) / static_cast<double>(p.n_aspects);
  return p;
}

void write_jsonl(std::ostream& out, const std::vector<Sentence>& sentences) {
  for (const Sentence& s : sentences) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    auto& toks = j["tokens"] = nlohmann::json::array();
    for (const Token& t : s.tokens) {
      toks.push_back(t.surface);
    }
    auto& tags = j["tags"] = nlohmann::json::array();
    for (const Tag t : s.gold_tags) {
      tags.push_back(std::string(1, tag_to_char(t)));
    }
    out << j.dump() << '\n';
  }
}

std::vector<Sentence> read_jsonl(std::istream& in) {
  std::vector<Sentence> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("jsonl line " + std::to_string(line_no) + ": " + e.what());
    }
    Sentence s;
    s.id = j.value("id", "");
    int pos = 0;
    for (const auto& tok : j.at("tokens")) {
      Token t;
      t.surface = tok.get<std::string>();
      // Offsets are rebuilt on a single-space join; the original spacing is
      // not stored in the cache format.
      t.start = pos;
      t.end = pos + static_cast<int>(utf8_decode(t.surface).size());
      pos = t.end + 1;
      s.tokens.push_back(std::move(t));
    }
    for (const auto& tag : j.at("tags")) {
      const std::string v = tag.get<std::string>();
      if (v.size() != 1) {
        throw ParseError("jsonl line " + std::to_string(line_no) + ": bad tag '" + v + "'");
      }
      s.gold_tags.push_back(tag_from_char(v[0]));
    }
    if (s.gold_tags.size() != s.tokens.size()) {
      throw ParseError("jsonl line " + std::to_string(line_no) +
                       ": tokens and tags lengths differ");
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sentence> read_jsonl_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("cannot open " + path);
  }
  return read_jsonl(in);
}

}  // namespace ate
