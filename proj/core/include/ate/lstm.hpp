#pragma once

#include <map>
#include <string>
#include <vector>

#include "ate/neural.hpp"
#include "ate/rng.hpp"

namespace ate {

enum class Direction { Forward, Backward };

// Gate parameters of one LSTM:
//   i_t = sigmoid(W_i h_{t-1} + U_i x_t + b_i)
//   f_t = sigmoid(W_f h_{t-1} + U_f x_t + b_f)
//   cbar = tanh  (W_c h_{t-1} + U_c x_t + b_c)
//   c_t = f_t (.) c_{t-1} + i_t (.) cbar
//   o_t = sigmoid(W_o h_{t-1} + U_o x_t + b_o)
//   h_t = o_t (.) tanh(c_t)
// U_* act on the input, W_* on the previous hidden state.
struct LstmParams {
  Param* U_i;
  Param* U_f;
  Param* U_c;
  Param* U_o;
  Param* W_i;
  Param* W_f;
  Param* W_c;
  Param* W_o;
  Param* b_i;
  Param* b_f;
  Param* b_c;
  Param* b_o;
  int input_dim = 0;
  int hidden_dim = 0;

  // Glorot-uniform weights; forget-gate bias 1.0, all other biases 0.
  static LstmParams create(ParamStore& store, const std::string& prefix, int input_dim,
                           int hidden_dim, Rng& rng);
};

struct LstmStateVars {
  Tape::Var h;
  Tape::Var c;
};

LstmStateVars lstm_cell(Tape& tape, Tape::Var x, LstmStateVars prev, const LstmParams& p);

// Runs the cell over the sequence. The backward direction consumes the
// reversed input and re-reverses its outputs, so out[t] always lines up with
// xs[t]. Empty input raises.
std::vector<Tape::Var> run_lstm(Tape& tape, const std::vector<Tape::Var>& xs,
                                const LstmParams& p, Direction dir);

// Concatenation [forward h_t ; backward h_t] per step.
std::vector<Tape::Var> bilstm(Tape& tape, const std::vector<Tape::Var>& xs,
                              const LstmParams& fwd, const LstmParams& bwd);

// Character inventory. Index 0 is padding, 1 the unknown-character bucket,
// observed characters follow in first-seen order.
class Charset {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Charset() = default;
  explicit Charset(const std::vector<char32_t>& chars);

  int add(char32_t c);  // returns the (possibly existing) index
  int lookup(char32_t c) const;
  int size() const { return 2 + static_cast<int>(chars_.size()); }
  const std::vector<char32_t>& chars() const { return chars_; }

 private:
  std::vector<char32_t> chars_;
  std::map<char32_t, int> index_;
};

// BiLSTM word encoder over characters. The word vector is the concatenation
// of the forward pass's last hidden state and the backward pass's last hidden
// state (the one aligned with the word's first character).
struct CharEncoderParams {
  Param* char_embed = nullptr;  // |charset| x char_dim
  LstmParams fwd;
  LstmParams bwd;
  int char_dim = 0;
  int hidden_dim = 0;

  int output_dim() const { return 2 * hidden_dim; }

  static CharEncoderParams create(ParamStore& store, const std::string& prefix, int charset_size,
                                  int char_dim, int hidden_dim, Rng& rng);
};

// Empty word encodes as the zero vector (padding contract).
Tape::Var encode_word_chars(Tape& tape, const std::string& word_utf8,
                            const CharEncoderParams& p, const Charset& charset);

}  // namespace ate
