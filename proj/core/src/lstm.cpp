#include "ate/lstm.hpp"

#include <algorithm>
#include <cmath>

#include "ate/text.hpp"

namespace ate {

LstmParams LstmParams::create(ParamStore& store, const std::string& prefix, int input_dim,
                              int hidden_dim, Rng& rng) {
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const auto mat = [&](const char* name, int rows, int cols) {
    Param& param = store.create(prefix + "." + name, rows, cols);
    glorot_uniform(param.value, rng);
    return &param;
  };
  p.U_i = mat("U_i", hidden_dim, input_dim);
  p.U_f = mat("U_f", hidden_dim, input_dim);
  p.U_c = mat("U_c", hidden_dim, input_dim);
  p.U_o = mat("U_o", hidden_dim, input_dim);
  p.W_i = mat("W_i", hidden_dim, hidden_dim);
  p.W_f = mat("W_f", hidden_dim, hidden_dim);
  p.W_c = mat("W_c", hidden_dim, hidden_dim);
  p.W_o = mat("W_o", hidden_dim, hidden_dim);
  p.b_i = &store.create(prefix + ".b_i", hidden_dim, 1);
  p.b_f = &store.create(prefix + ".b_f", hidden_dim, 1);
  p.b_c = &store.create(prefix + ".b_c", hidden_dim, 1);
  p.b_o = &store.create(prefix + ".b_o", hidden_dim, 1);
  p.b_f->value.setOnes();  // standard forget-gate bias
  return p;
}

LstmStateVars lstm_cell(Tape& tape, Tape::Var x, LstmStateVars prev, const LstmParams& p) {
  const auto gate_pre = [&](Param* W, Param* U, Param* b) {
    return tape.add(tape.affine(prev.h, *W, b), tape.affine(x, *U, nullptr));
  };
  const Tape::Var i = tape.sigmoid(gate_pre(p.W_i, p.U_i, p.b_i));
  const Tape::Var f = tape.sigmoid(gate_pre(p.W_f, p.U_f, p.b_f));
  const Tape::Var cbar = tape.tanh(gate_pre(p.W_c, p.U_c, p.b_c));
  const Tape::Var c = tape.add(tape.hadamard(f, prev.c), tape.hadamard(i, cbar));
  const Tape::Var o = tape.sigmoid(gate_pre(p.W_o, p.U_o, p.b_o));
  const Tape::Var h = tape.hadamard(o, tape.tanh(c));
  return {h, c};
}

std::vector<Tape::Var> run_lstm(Tape& tape, const std::vector<Tape::Var>& xs,
                                const LstmParams& p, Direction dir) {
  if (xs.empty()) {
    throw ContractError("run_lstm: empty sequence");
  }
  LstmStateVars state{tape.input(Vec::Zero(p.hidden_dim)), tape.input(Vec::Zero(p.hidden_dim))};
  std::vector<Tape::Var> out(xs.size());
  if (dir == Direction::Forward) {
    for (std::size_t t = 0; t < xs.size(); ++t) {
      state = lstm_cell(tape, xs[t], state, p);
      out[t] = state.h;
    }
  } else {
    for (std::size_t t = xs.size(); t > 0; --t) {
      state = lstm_cell(tape, xs[t - 1], state, p);
      out[t - 1] = state.h;
    }
  }
  return out;
}

std::vector<Tape::Var> bilstm(Tape& tape, const std::vector<Tape::Var>& xs,
                              const LstmParams& fwd, const LstmParams& bwd) {
  const std::vector<Tape::Var> f = run_lstm(tape, xs, fwd, Direction::Forward);
  const std::vector<Tape::Var> b = run_lstm(tape, xs, bwd, Direction::Backward);
  std::vector<Tape::Var> out(xs.size());
  for (std::size_t t = 0; t < xs.size(); ++t) {
    out[t] = tape.concat(f[t], b[t]);
  }
  return out;
}

Charset::Charset(const std::vector<char32_t>& chars) {
  for (const char32_t c : chars) {
    add(c);
  }
}

int Charset::add(char32_t c) {
  const auto it = index_.find(c);
  if (it != index_.end()) {
    return it->second;
  }
  const int id = size();
  chars_.push_back(c);
  index_.emplace(c, id);
  return id;
}

int Charset::lookup(char32_t c) const {
  const auto it = index_.find(c);
  return it == index_.end() ? kUnk : it->second;
}

CharEncoderParams CharEncoderParams::create(ParamStore& store, const std::string& prefix,
                                            int charset_size, int char_dim, int hidden_dim,
                                            Rng& rng) {
  CharEncoderParams p;
  p.char_dim = char_dim;
  p.hidden_dim = hidden_dim;
  p.char_embed = &store.create(prefix + ".embed", charset_size, char_dim);
  glorot_uniform(p.char_embed->value, rng);
  p.char_embed->value.row(Charset::kPad).setZero();
  p.fwd = LstmParams::create(store, prefix + ".fwd", char_dim, hidden_dim, rng);
  p.bwd = LstmParams::create(store, prefix + ".bwd", char_dim, hidden_dim, rng);
  return p;
}

Tape::Var encode_word_chars(Tape& tape, const std::string& word_utf8, const CharEncoderParams& p,
                            const Charset& charset) {
  const std::u32string chars = utf8_decode(word_utf8);
  if (chars.empty()) {
    return tape.input(Vec::Zero(p.output_dim()));
  }
  std::vector<Tape::Var> xs;
  xs.reserve(chars.size());
  for (const char32_t c : chars) {
    xs.push_back(tape.embed_row(*p.char_embed, charset.lookup(c)));
  }
  LstmStateVars f{tape.input(Vec::Zero(p.hidden_dim)), tape.input(Vec::Zero(p.hidden_dim))};
  for (const Tape::Var x : xs) {
    f = lstm_cell(tape, x, f, p.fwd);
  }
  LstmStateVars b{tape.input(Vec::Zero(p.hidden_dim)), tape.input(Vec::Zero(p.hidden_dim))};
  for (std::size_t t = chars.size(); t > 0; --t) {
    b = lstm_cell(tape, xs[t - 1], b, p.bwd);
  }
  // b.h is the backward pass's final state, i.e. the one over the first char.
  return tape.concat(f.h, b.h);
}

}  // namespace ate
