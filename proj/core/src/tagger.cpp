#include "ate/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include <json.hpp>

#include "ate/evaluation.hpp"
#include "ate/text.hpp"

namespace ate {

std::string TaggerConfig::method_name() const {
  std::string name = use_char ? "WoCh-" : "Wo-";
  name += bidirectional ? "BiLSTM" : "LSTM";
  if (use_crf) {
    name += "-CRF";
  }
  return name;
}

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = {
      "Wo-LSTM",   "WoCh-LSTM",   "Wo-LSTM-CRF",   "WoCh-LSTM-CRF",
      "Wo-BiLSTM", "WoCh-BiLSTM", "Wo-BiLSTM-CRF", "WoCh-BiLSTM-CRF"};
  return names;
}

TaggerConfig TaggerConfig::from_method(const std::string& name) {
  for (const bool use_char : {false, true}) {
    for (const bool bidirectional : {false, true}) {
      for (const bool use_crf : {false, true}) {
        TaggerConfig cfg;
        cfg.use_char = use_char;
        cfg.bidirectional = bidirectional;
        cfg.use_crf = use_crf;
        if (cfg.method_name() == name) {
          return cfg;
        }
      }
    }
  }
  std::string legal;
  for (const std::string& m : method_names()) {
    legal += legal.empty() ? m : ", " + m;
  }
  throw ContractError("unknown method '" + name + "'; legal methods: " + legal);
}

Charset build_charset(const std::vector<Sentence>& sentences) {
  Charset charset;
  for (const Sentence& s : sentences) {
    for (const Token& t : s.tokens) {
      for (const char32_t c : utf8_decode(t.surface)) {
        charset.add(c);
      }
    }
  }
  return charset;
}

TaggerModel::TaggerModel(const TaggerConfig& config, const Vocabulary& vocab,
                         const Charset& charset, int word_dim, const Mat* word_matrix,
                         std::uint64_t seed)
    : config_(config),
      vocab_(vocab),
      charset_(charset),
      word_dim_(word_dim),
      params_(std::make_unique<ParamStore>()) {
  if (word_dim_ <= 0) {
    throw ContractError("TaggerModel: word dimension must be positive");
  }
  Rng rng(Rng::derive(seed, "params"));
  word_embed_ = &params_->create("word_embed", vocab_.size(), word_dim_,
                                 /*trainable=*/config_.train_embeddings);
  if (word_matrix != nullptr) {
    if (word_matrix->rows() != vocab_.size() || word_matrix->cols() != word_dim_) {
      throw ContractError("TaggerModel: embedding matrix shape mismatch");
    }
    word_embed_->value = *word_matrix;
  }
  int input_dim = word_dim_;
  if (config_.use_char) {
    char_encoder_ = CharEncoderParams::create(*params_, "chars", charset_.size(),
                                              config_.char_dim, config_.char_hidden, rng);
    input_dim += char_encoder_->output_dim();
  }
  word_fwd_ = LstmParams::create(*params_, "word.fwd", input_dim, config_.word_hidden, rng);
  if (config_.bidirectional) {
    word_bwd_ = LstmParams::create(*params_, "word.bwd", input_dim, config_.word_hidden, rng);
  }
  if (config_.use_crf) {
    crf_ = CrfParams::create(*params_, "crf", recurrent_dim(), rng);
  } else {
    softmax_w_ = &params_->create("softmax.W", kNumTags, recurrent_dim());
    glorot_uniform(softmax_w_->value, rng);
    softmax_b_ = &params_->create("softmax.b", kNumTags, 1);
  }
}

TaggerModel TaggerModel::build(const TaggerConfig& config, const EmbeddingTable& table,
                               const Vocabulary& vocab, const Charset& charset,
                               std::uint64_t seed) {
  const Mat matrix = build_matrix(table, vocab, Rng::derive(seed, "embeddings"));
  return TaggerModel(config, vocab, charset, table.dim, &matrix, seed);
}

std::vector<Tape::Var> TaggerModel::features(Tape& tape, const Sentence& sentence, bool train,
                                             Rng* rng) const {
  Rng unused(0);
  Rng& dropout_rng = rng != nullptr ? *rng : unused;
  std::vector<Tape::Var> xs;
  xs.reserve(sentence.tokens.size());
  for (const Token& t : sentence.tokens) {
    Tape::Var x = tape.embed_row(*word_embed_, vocab_.lookup(t.surface));
    if (char_encoder_.has_value()) {
      x = tape.concat(x, encode_word_chars(tape, t.surface, *char_encoder_, charset_));
    }
    xs.push_back(tape.dropout(x, config_.dropout, train, dropout_rng));
  }
  std::vector<Tape::Var> hs =
      config_.bidirectional ? bilstm(tape, xs, *word_fwd_, *word_bwd_)
                            : run_lstm(tape, xs, *word_fwd_, Direction::Forward);
  for (Tape::Var& h : hs) {
    h = tape.dropout(h, config_.dropout, train, dropout_rng);
  }
  return hs;
}

Tape::Var TaggerModel::sentence_loss(Tape& tape, const Sentence& sentence, bool train,
                                     Rng& rng) {
  if (sentence.tokens.empty()) {
    throw ContractError("sentence_loss: empty sentence");
  }
  if (sentence.gold_tags.size() != sentence.tokens.size()) {
    throw ContractError("sentence_loss: tags do not align with tokens in sentence '" +
                        sentence.id + "'");
  }
  const std::vector<Tape::Var> hs = features(tape, sentence, train, &rng);
  if (config_.use_crf) {
    return crf_nll(tape, crf_emissions(tape, hs, *crf_), tags_to_ints(sentence.gold_tags),
                   *crf_);
  }
  std::vector<Tape::Var> token_losses;
  token_losses.reserve(hs.size());
  for (std::size_t i = 0; i < hs.size(); ++i) {
    const Tape::Var logits = tape.affine(hs[i], *softmax_w_, softmax_b_);
    token_losses.push_back(
        tape.softmax_cross_entropy(logits, static_cast<int>(sentence.gold_tags[i])));
  }
  return tape.sum(token_losses);
}

TagSequence TaggerModel::predict_raw(const Sentence& sentence) const {
  if (sentence.tokens.empty()) {
    return {};
  }
  Tape tape;
  const std::vector<Tape::Var> hs = features(tape, sentence, /*train=*/false, nullptr);
  if (config_.use_crf) {
    std::vector<Tape::Var> em = crf_emissions(tape, hs, *crf_);
    std::vector<Vec> scores;
    scores.reserve(em.size());
    for (const Tape::Var e : em) {
      scores.push_back(tape.value(e));
    }
    return ints_to_tags(crf_decode(scores, *crf_, /*constrained=*/true));
  }
  TagSequence tags(sentence.tokens.size());
  for (std::size_t i = 0; i < hs.size(); ++i) {
    const Tape::Var logits = tape.affine(hs[i], *softmax_w_, softmax_b_);
    const Vec& l = tape.value(logits);
    int best = 0;
    for (int k = 1; k < kNumTags; ++k) {
      if (l[k] > l[best]) {
        best = k;
      }
    }
    tags[i] = static_cast<Tag>(best);
  }
  return tags;
}

std::vector<TagSequence> predict(const TaggerModel& model,
                                 const std::vector<Sentence>& sentences) {
  std::vector<TagSequence> out;
  out.reserve(sentences.size());
  for (const Sentence& s : sentences) {
    const TagSequence raw = model.predict_raw(s);
    out.push_back(encode_iob(static_cast<int>(raw.size()), decode_iob(raw)));
  }
  return out;
}

std::vector<std::vector<AspectSpan>> predict_spans(const TaggerModel& model,
                                                   const std::vector<Sentence>& sentences) {
  std::vector<std::vector<AspectSpan>> out;
  out.reserve(sentences.size());
  for (const Sentence& s : sentences) {
    out.push_back(decode_iob(model.predict_raw(s)));
  }
  return out;
}

namespace {

Sentence truncated(const Sentence& s, int max_len) {
  if (static_cast<int>(s.tokens.size()) <= max_len) {
    return s;
  }
  Sentence t;
  t.id = s.id;
  t.tokens.assign(s.tokens.begin(), s.tokens.begin() + max_len);
  t.gold_tags.assign(s.gold_tags.begin(), s.gold_tags.begin() + max_len);
  return t;
}

}  // namespace

TrainLog train(TaggerModel& model, const std::vector<Sentence>& train_sentences) {
  const TaggerConfig& cfg = model.config();
  TrainLog log;
  if (cfg.max_epochs == 0) {
    return log;
  }
  if (train_sentences.empty()) {
    throw ContractError("train: no sentences");
  }
  if (train_sentences.size() < 2) {
    throw ContractError("train: need at least 2 sentences to carve a validation split");
  }

  const std::size_t n = train_sentences.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(Rng::derive(cfg.seed, "split"));
  split_rng.shuffle(order);
  auto n_val = static_cast<std::size_t>(static_cast<double>(n) * cfg.val_fraction);
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  std::vector<std::size_t> train_idx(order.begin(), order.end() - static_cast<long>(n_val));
  const std::vector<std::size_t> val_idx(order.end() - static_cast<long>(n_val), order.end());

  std::vector<Sentence> val_sentences;
  std::vector<std::vector<AspectSpan>> val_gold;
  val_sentences.reserve(n_val);
  for (const std::size_t i : val_idx) {
    val_sentences.push_back(train_sentences[i]);
    val_gold.push_back(decode_iob(train_sentences[i].gold_tags));
  }

  Rng rng(Rng::derive(cfg.seed, "train"));
  AdamState adam;
  std::vector<Mat> best_weights;
  int bad_epochs = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(train_idx);
    double loss_sum = 0.0;
    long loss_count = 0;
    for (std::size_t b = 0; b < train_idx.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t batch_end =
          std::min(train_idx.size(), b + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Sentence> batch;
      for (std::size_t i = b; i < batch_end; ++i) {
        Sentence t = truncated(train_sentences[train_idx[i]], cfg.max_len);
        if (!t.tokens.empty()) {
          batch.push_back(std::move(t));
        }
      }
      if (batch.empty()) {
        continue;
      }
      for (const Sentence& s : batch) {
        Tape tape;
        const Tape::Var loss = model.sentence_loss(tape, s, /*train=*/true, rng);
        const double value = tape.value(loss)[0];
        if (!std::isfinite(value)) {
          throw TrainingError("training diverged: non-finite loss at epoch " +
                              std::to_string(epoch) + ", sentence '" + s.id + "'");
        }
        loss_sum += value;
        ++loss_count;
        // Backward through the batch-mean loss, one sentence at a time;
        // parameter gradients accumulate across tapes until the Adam step.
        tape.backward(tape.scale(loss, 1.0 / static_cast<double>(batch.size())));
      }
      adam.step(model.params());
    }
    log.train_loss.push_back(loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0);

    const double val_f1 = 100.0 * exact_f1(val_gold, predict_spans(model, val_sentences)).f1;
    log.val_f1.push_back(val_f1);
    log.stopped_epoch = epoch;
    if (log.best_epoch == 0 || val_f1 > log.best_val_f1) {
      log.best_epoch = epoch;
      log.best_val_f1 = val_f1;
      best_weights = model.params().snapshot_values();
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (bad_epochs >= cfg.patience) {
        break;
      }
    }
  }
  if (!best_weights.empty()) {
    model.params().restore_values(best_weights);
  }
  return log;
}

TaggerEval evaluate_tagger(const TaggerModel& model, const std::vector<Sentence>& sentences) {
  std::vector<std::vector<AspectSpan>> gold;
  std::vector<std::vector<AspectSpan>> repaired;
  std::vector<std::vector<AspectSpan>> strict;
  gold.reserve(sentences.size());
  TaggerEval eval;
  for (const Sentence& s : sentences) {
    gold.push_back(decode_iob(s.gold_tags));
    const TagSequence raw = model.predict_raw(s);
    eval.iob_violations += iob_violation_count(raw);
    repaired.push_back(decode_iob(raw));
    strict.push_back(decode_iob_strict(raw));
  }
  const PrfScores rep = exact_f1(gold, repaired);
  eval.precision = rep.precision;
  eval.recall = rep.recall;
  eval.f1 = rep.f1;
  eval.f1_raw = exact_f1(gold, strict).f1;
  return eval;
}

namespace {

constexpr const char* kMetaFormat = "ate-tagger-meta";
constexpr int kMetaVersion = 1;

}  // namespace

void TaggerModel::save(const std::string& meta_path, const std::string& checkpoint_path) const {
  nlohmann::ordered_json j;
  j["format"] = kMetaFormat;
  j["version"] = kMetaVersion;
  j["method"] = config_.method_name();
  j["embedding_name"] = config_.embedding_name;
  j["word_dim"] = word_dim_;
  nlohmann::ordered_json c;
  c["word_hidden"] = config_.word_hidden;
  c["char_dim"] = config_.char_dim;
  c["char_hidden"] = config_.char_hidden;
  c["dropout"] = config_.dropout;
  c["batch_size"] = config_.batch_size;
  c["max_len"] = config_.max_len;
  c["max_epochs"] = config_.max_epochs;
  c["patience"] = config_.patience;
  c["val_fraction"] = config_.val_fraction;
  c["seed"] = config_.seed;
  c["train_embeddings"] = config_.train_embeddings;
  j["config"] = std::move(c);
  j["vocab"] = vocab_.words();
  std::vector<std::uint32_t> chars;
  chars.reserve(charset_.chars().size());
  for (const char32_t ch : charset_.chars()) {
    chars.push_back(static_cast<std::uint32_t>(ch));
  }
  j["charset"] = chars;

  std::ofstream out(meta_path);
  if (!out) {
    throw ParseError("cannot open " + meta_path + " for writing");
  }
  out << j.dump(2) << '\n';
  params_->save_file(checkpoint_path);
}

TaggerModel TaggerModel::load(const std::string& meta_path, const std::string& checkpoint_path) {
  std::ifstream in(meta_path);
  if (!in) {
    throw ParseError("cannot open " + meta_path);
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(meta_path + ": " + e.what());
  }
  if (j.value("format", "") != kMetaFormat) {
    throw ParseError(meta_path + ": not a tagger description");
  }
  if (j.value("version", 0) != kMetaVersion) {
    throw ParseError(meta_path + ": unsupported version");
  }
  TaggerConfig cfg = TaggerConfig::from_method(j.at("method").get<std::string>());
  cfg.embedding_name = j.at("embedding_name").get<std::string>();
  const nlohmann::json& c = j.at("config");
  cfg.word_hidden = c.at("word_hidden").get<int>();
  cfg.char_dim = c.at("char_dim").get<int>();
  cfg.char_hidden = c.at("char_hidden").get<int>();
  cfg.dropout = c.at("dropout").get<double>();
  cfg.batch_size = c.at("batch_size").get<int>();
  cfg.max_len = c.at("max_len").get<int>();
  cfg.max_epochs = c.at("max_epochs").get<int>();
  cfg.patience = c.at("patience").get<int>();
  cfg.val_fraction = c.at("val_fraction").get<double>();
  cfg.seed = c.at("seed").get<std::uint64_t>();
  cfg.train_embeddings = c.at("train_embeddings").get<bool>();

  const Vocabulary vocab = Vocabulary::from_words(j.at("vocab").get<std::vector<std::string>>());
  std::vector<char32_t> chars;
  for (const std::uint32_t ch : j.at("charset").get<std::vector<std::uint32_t>>()) {
    chars.push_back(static_cast<char32_t>(ch));
  }
  TaggerModel model(cfg, vocab, Charset(chars), j.at("word_dim").get<int>(), nullptr, cfg.seed);
  model.params().load_file(checkpoint_path);
  return model;
}

}  // namespace ate
