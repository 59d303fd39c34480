#pragma once

#include <string>
#include <vector>

#include "ate/corpus.hpp"
#include "ate/neural.hpp"
#include "ate/rng.hpp"
#include "ate/types.hpp"

namespace ate {

inline constexpr int kNumTags = 3;  // O, B, I

// Per-sentence scoring lattice for a linear-chain CRF: one emission score per
// (position, tag) plus shared transition/start/end scores. The score of a tag
// sequence y is
//   start[y_1] + sum_i emissions(i, y_i) + sum_i T(y_{i-1}, y_i) + end[y_n].
struct LatticeScores {
  Mat emissions;  // n x K
  Mat transitions;  // K x K; transitions(a, b) scores a -> b
  Vec start;
  Vec end;

  Eigen::Index length() const { return emissions.rows(); }
  Eigen::Index n_tags() const { return emissions.cols(); }
};

// Log-domain score of one tag sequence.
double sequence_score(const LatticeScores& lattice, const std::vector<int>& y);

// log of the sum of exp(score) over all K^n tag sequences, via the forward
// recursion with log-sum-exp stabilization.
double log_partition(const LatticeScores& lattice);

// Negative log-likelihood of the gold sequence with analytic gradients,
// computed by forward-backward: the emission gradient at each position is the
// posterior tag marginal minus the gold one-hot.
struct CrfGradients {
  double loss = 0.0;
  Mat d_emissions;  // n x K
  Mat d_transitions;  // K x K
  Vec d_start;
  Vec d_end;
};
CrfGradients nll_loss(const LatticeScores& lattice, const std::vector<int>& gold);

// Highest-scoring tag sequence. Ties are broken toward the lowest tag index
// at every backtracking step, including the final-state choice. When
// `constrained`, sequences that would start with I or transition O -> I are
// forbidden (scored -inf), so the output is always IOB-valid; this requires
// the 3-tag O/B/I lattice.
std::vector<int> viterbi(const LatticeScores& lattice, bool constrained);

// Trainable CRF head: a linear projection from feature vectors to per-tag
// emission scores, plus the transition/start/end tables. The projection is
// Glorot-initialized; the tables start at zero.
struct CrfParams {
  Param* proj = nullptr;  // K x feature_dim
  Param* proj_b = nullptr;  // K
  Param* transitions = nullptr;  // K x K
  Param* start = nullptr;  // K
  Param* end = nullptr;  // K
  int feature_dim = 0;

  static CrfParams create(ParamStore& store, const std::string& prefix, int feature_dim,
                          Rng& rng);
};

// Projects per-position features through the CRF head's emission layer.
std::vector<Tape::Var> crf_emissions(Tape& tape, const std::vector<Tape::Var>& features,
                                     const CrfParams& params);

// Records nll_loss on the tape as a single fused node: the forward value is
// the NLL and the backward closure scatters the analytic gradients into the
// emission vars and the transition/start/end params.
Tape::Var crf_nll(Tape& tape, const std::vector<Tape::Var>& emissions,
                  const std::vector<int>& gold, const CrfParams& params);

// Decodes with the head's current tables given emission score values.
std::vector<int> crf_decode(const std::vector<Vec>& emissions, const CrfParams& params,
                            bool constrained);

std::vector<int> tags_to_ints(const TagSequence& tags);
TagSequence ints_to_tags(const std::vector<int>& ids);

}  // namespace ate
