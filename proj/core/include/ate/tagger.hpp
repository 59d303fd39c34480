#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ate/corpus.hpp"
#include "ate/crf.hpp"
#include "ate/embeddings.hpp"
#include "ate/lstm.hpp"
#include "ate/neural.hpp"

namespace ate {

// One ablation cell's knobs. The (use_char, bidirectional, use_crf) triple
// maps 1:1 to the eight method abbreviations: Wo/WoCh prefix for the char
// encoder, LSTM/BiLSTM for directionality, a -CRF suffix for the head.
struct TaggerConfig {
  bool use_char = false;
  bool bidirectional = false;
  bool use_crf = false;
  int word_hidden = 100;
  int char_dim = 25;
  int char_hidden = 25;
  double dropout = 0.5;
  int batch_size = 10;
  int max_len = 30;  // training-time truncation; prediction is full-length
  int max_epochs = 25;
  int patience = 2;
  double val_fraction = 0.1;
  std::uint64_t seed = 1;
  std::string embedding_name;
  bool train_embeddings = false;

  std::string method_name() const;
  // Flags from a method abbreviation; everything else keeps defaults.
  // Unknown names raise, listing the eight legal values.
  static TaggerConfig from_method(const std::string& name);
};

const std::vector<std::string>& method_names();

// Character inventory of the training split.
Charset build_charset(const std::vector<Sentence>& sentences);

// A word(+char) recurrent tagger with a softmax or CRF head. Holds its own
// parameters; movable but not copyable (sub-structures point into the store).
class TaggerModel {
 public:
  static TaggerModel build(const TaggerConfig& config, const EmbeddingTable& table,
                           const Vocabulary& vocab, const Charset& charset, std::uint64_t seed);

  TaggerModel(TaggerModel&&) = default;
  TaggerModel& operator=(TaggerModel&&) = default;
  TaggerModel(const TaggerModel&) = delete;
  TaggerModel& operator=(const TaggerModel&) = delete;

  const TaggerConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const Charset& charset() const { return charset_; }
  int word_dim() const { return word_dim_; }
  int recurrent_dim() const {
    return config_.bidirectional ? 2 * config_.word_hidden : config_.word_hidden;
  }
  ParamStore& params() { return *params_; }
  const ParamStore& params() const { return *params_; }

  // Training loss of one sentence: CRF sequence NLL, or the sum of per-token
  // softmax cross-entropies. `train` enables dropout fed from `rng`.
  // Sentences must be non-empty and tags must align with tokens.
  Tape::Var sentence_loss(Tape& tape, const Sentence& sentence, bool train, Rng& rng);

  // Raw evaluation-mode tags: constrained Viterbi for CRF heads (never
  // IOB-invalid), per-token argmax (first index on ties) for softmax heads
  // (possibly invalid). Empty sentences predict empty sequences.
  TagSequence predict_raw(const Sentence& sentence) const;

  // Serialization: a JSON description (config, vocabulary, charset) plus the
  // binary parameter checkpoint. Loading rebuilds bit-identical predictions.
  void save(const std::string& meta_path, const std::string& checkpoint_path) const;
  static TaggerModel load(const std::string& meta_path, const std::string& checkpoint_path);

 private:
  TaggerModel(const TaggerConfig& config, const Vocabulary& vocab, const Charset& charset,
              int word_dim, const Mat* word_matrix, std::uint64_t seed);

  std::vector<Tape::Var> features(Tape& tape, const Sentence& sentence, bool train,
                                  Rng* rng) const;

  TaggerConfig config_;
  Vocabulary vocab_;
  Charset charset_;
  int word_dim_ = 0;
  std::unique_ptr<ParamStore> params_;
  Param* word_embed_ = nullptr;
  std::optional<CharEncoderParams> char_encoder_;
  std::optional<LstmParams> word_fwd_;
  std::optional<LstmParams> word_bwd_;
  Param* softmax_w_ = nullptr;
  Param* softmax_b_ = nullptr;
  std::optional<CrfParams> crf_;
};

// Decoded tags after IOB repair (a no-op for CRF heads).
std::vector<TagSequence> predict(const TaggerModel& model, const std::vector<Sentence>& sentences);
std::vector<std::vector<AspectSpan>> predict_spans(const TaggerModel& model,
                                                   const std::vector<Sentence>& sentences);

struct TrainLog {
  std::vector<double> train_loss;  // mean per-sentence loss, one entry per epoch
  std::vector<double> val_f1;  // percent, one entry per epoch
  int best_epoch = 0;  // 1-based; 0 when no epoch ran
  int stopped_epoch = 0;  // epochs actually run
  double best_val_f1 = 0.0;  // percent
};

// The published training recipe: a seeded validation split carved off the
// train set, shuffled mini-batches with sentences truncated to max_len,
// Adam steps on the batch-mean loss, early stopping on validation F1 with
// the configured patience, and best-epoch weight restoration. Non-finite
// losses abort with TrainingError.
TrainLog train(TaggerModel& model, const std::vector<Sentence>& train_sentences);

// Test-set scores against the sentences' gold tags. f1 scores decoded
// (repaired) spans; f1_raw credits only spans already valid in the raw tags.
// All fractions in [0, 1].
struct TaggerEval {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double f1_raw = 0.0;
  long iob_violations = 0;
};
TaggerEval evaluate_tagger(const TaggerModel& model, const std::vector<Sentence>& sentences);

}  // namespace ate
