#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ate {

// SemEval offsets are Unicode character positions, so all span arithmetic in
// the corpus layer runs over decoded code points, not bytes.

// Decodes UTF-8 into code points. Invalid bytes decode as one replacement
// character each, keeping one input byte per output position at worst.
std::u32string utf8_decode(std::string_view s);

std::string utf8_encode(std::u32string_view s);
std::string utf8_encode(char32_t c);

// ASCII-only lowercasing; matches the casing convention of the pretrained
// vector files (GloVe is lowercase ASCII, word2vec mixed ASCII case).
std::string fold_case(std::string_view s);

// Collapses whitespace runs to single spaces and trims the ends.
std::string normalize_whitespace(std::string_view s);

bool is_space_char(char32_t c);

// Word characters glue into one token; any other non-space code point becomes
// a single-character token.
bool is_word_char(char32_t c);

}  // namespace ate
