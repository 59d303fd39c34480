#include "ate/crf.hpp"

#include <cmath>
#include <limits>

namespace ate {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const Vec& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) {
    return m;
  }
  return m + std::log((v.array() - m).exp().sum());
}

void check_lattice(const LatticeScores& lattice) {
  const Eigen::Index n = lattice.length();
  const Eigen::Index k = lattice.n_tags();
  if (n < 1) {
    throw ContractError("crf: lattice must cover at least one position");
  }
  if (lattice.transitions.rows() != k || lattice.transitions.cols() != k ||
      lattice.start.size() != k || lattice.end.size() != k) {
    throw ContractError("crf: transition/start/end shapes disagree with emissions");
  }
}

}  // namespace

double sequence_score(const LatticeScores& lattice, const std::vector<int>& y) {
  check_lattice(lattice);
  const Eigen::Index n = lattice.length();
  const Eigen::Index k = lattice.n_tags();
  if (static_cast<Eigen::Index>(y.size()) != n) {
    throw ContractError("sequence_score: tag sequence length " + std::to_string(y.size()) +
                        " does not match lattice length " + std::to_string(n));
  }
  for (const int t : y) {
    if (t < 0 || t >= k) {
      throw ContractError("sequence_score: tag index out of range");
    }
  }
  double score = lattice.start[y[0]] + lattice.emissions(0, y[0]);
  for (Eigen::Index i = 1; i < n; ++i) {
    score += lattice.transitions(y[i - 1], y[i]) + lattice.emissions(i, y[i]);
  }
  return score + lattice.end[y[n - 1]];
}

double log_partition(const LatticeScores& lattice) {
  check_lattice(lattice);
  const Eigen::Index n = lattice.length();
  const Eigen::Index k = lattice.n_tags();
  Vec alpha = lattice.start + lattice.emissions.row(0).transpose();
  for (Eigen::Index i = 1; i < n; ++i) {
    Vec next(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      next[j] = lattice.emissions(i, j) + log_sum_exp(alpha + lattice.transitions.col(j));
    }
    alpha = std::move(next);
  }
  return log_sum_exp(alpha + lattice.end);
}

CrfGradients nll_loss(const LatticeScores& lattice, const std::vector<int>& gold) {
  check_lattice(lattice);
  const Eigen::Index n = lattice.length();
  const Eigen::Index k = lattice.n_tags();
  const double gold_score = sequence_score(lattice, gold);

  // Forward and backward log-messages. alpha(i, j) includes emissions(i, j);
  // beta(i, j) covers everything after position i, including end scores.
  Mat alpha(n, k);
  alpha.row(0) = (lattice.start + lattice.emissions.row(0).transpose()).transpose();
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      alpha(i, j) = lattice.emissions(i, j) +
                    log_sum_exp(alpha.row(i - 1).transpose() + lattice.transitions.col(j));
    }
  }
  Mat beta(n, k);
  beta.row(n - 1) = lattice.end.transpose();
  for (Eigen::Index i = n - 2; i >= 0; --i) {
    for (Eigen::Index a = 0; a < k; ++a) {
      beta(i, a) = log_sum_exp(lattice.transitions.row(a).transpose() +
                               lattice.emissions.row(i + 1).transpose() +
                               beta.row(i + 1).transpose());
    }
  }
  const double log_z = log_sum_exp(alpha.row(n - 1).transpose() + lattice.end);

  CrfGradients g;
  g.loss = log_z - gold_score;
  g.d_emissions = Mat::Zero(n, k);
  g.d_transitions = Mat::Zero(k, k);
  g.d_start = Vec::Zero(k);
  g.d_end = Vec::Zero(k);

  // Unary marginals minus the gold indicator.
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      g.d_emissions(i, j) = std::exp(alpha(i, j) + beta(i, j) - log_z);
    }
    g.d_emissions(i, gold[i]) -= 1.0;
  }
  // Pairwise marginals minus gold transition counts.
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) {
        g.d_transitions(a, b) += std::exp(alpha(i - 1, a) + lattice.transitions(a, b) +
                                          lattice.emissions(i, b) + beta(i, b) - log_z);
      }
    }
    g.d_transitions(gold[i - 1], gold[i]) -= 1.0;
  }
  // The start (end) gradient is the first (last) position's marginal minus
  // the gold one-hot — exactly the emission gradient already computed there.
  g.d_start = g.d_emissions.row(0).transpose();
  g.d_end = g.d_emissions.row(n - 1).transpose();
  return g;
}

std::vector<int> viterbi(const LatticeScores& lattice, bool constrained) {
  check_lattice(lattice);
  const Eigen::Index n = lattice.length();
  const Eigen::Index k = lattice.n_tags();
  if (constrained && k != kNumTags) {
    throw ContractError("viterbi: IOB constraints require a 3-tag lattice");
  }
  Vec start = lattice.start;
  Mat trans = lattice.transitions;
  if (constrained) {
    start[static_cast<int>(Tag::I)] = kNegInf;
    trans(static_cast<int>(Tag::O), static_cast<int>(Tag::I)) = kNegInf;
  }

  Mat delta(n, k);
  Eigen::MatrixXi back(n, k);
  delta.row(0) = (start + lattice.emissions.row(0).transpose()).transpose();
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      double best = kNegInf;
      int best_prev = 0;
      for (Eigen::Index a = 0; a < k; ++a) {
        const double cand = delta(i - 1, a) + trans(a, j);
        if (cand > best) {
          best = cand;
          best_prev = static_cast<int>(a);
        }
      }
      delta(i, j) = best + lattice.emissions(i, j);
      back(i, j) = best_prev;
    }
  }
  double best = kNegInf;
  int last = 0;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double cand = delta(n - 1, j) + lattice.end[j];
    if (cand > best) {
      best = cand;
      last = static_cast<int>(j);
    }
  }
  std::vector<int> path(n);
  path[n - 1] = last;
  for (Eigen::Index i = n - 1; i > 0; --i) {
    path[i - 1] = back(i, path[i]);
  }
  return path;
}

CrfParams CrfParams::create(ParamStore& store, const std::string& prefix, int feature_dim,
                            Rng& rng) {
  CrfParams p;
  p.feature_dim = feature_dim;
  p.proj = &store.create(prefix + ".proj", kNumTags, feature_dim);
  glorot_uniform(p.proj->value, rng);
  p.proj_b = &store.create(prefix + ".proj_b", kNumTags, 1);
  p.transitions = &store.create(prefix + ".transitions", kNumTags, kNumTags);
  p.start = &store.create(prefix + ".start", kNumTags, 1);
  p.end = &store.create(prefix + ".end", kNumTags, 1);
  return p;
}

std::vector<Tape::Var> crf_emissions(Tape& tape, const std::vector<Tape::Var>& features,
                                     const CrfParams& params) {
  std::vector<Tape::Var> out;
  out.reserve(features.size());
  for (const Tape::Var f : features) {
    out.push_back(tape.affine(f, *params.proj, params.proj_b));
  }
  return out;
}

namespace {

LatticeScores gather_lattice(const Tape& tape, const std::vector<Tape::Var>& emissions,
                             const CrfParams& params) {
  if (emissions.empty()) {
    throw ContractError("crf: lattice must cover at least one position");
  }
  LatticeScores lattice;
  lattice.emissions.resize(static_cast<Eigen::Index>(emissions.size()), kNumTags);
  for (std::size_t i = 0; i < emissions.size(); ++i) {
    if (tape.value(emissions[i]).size() != kNumTags) {
      throw ContractError("crf: emission vectors must have one score per tag");
    }
    lattice.emissions.row(static_cast<Eigen::Index>(i)) = tape.value(emissions[i]).transpose();
  }
  lattice.transitions = params.transitions->value;
  lattice.start = params.start->value.col(0);
  lattice.end = params.end->value.col(0);
  return lattice;
}

}  // namespace

Tape::Var crf_nll(Tape& tape, const std::vector<Tape::Var>& emissions,
                  const std::vector<int>& gold, const CrfParams& params) {
  const LatticeScores lattice = gather_lattice(tape, emissions, params);
  CrfGradients g = nll_loss(lattice, gold);
  Vec loss(1);
  loss[0] = g.loss;
  const Tape::Var y = tape.make_node(std::move(loss));
  tape.push_backward(
      [y, emissions, g = std::move(g), &params](Tape& t) {
        const double gy = t.grad(y)[0];
        for (std::size_t i = 0; i < emissions.size(); ++i) {
          t.grad(emissions[i]) += gy * g.d_emissions.row(static_cast<Eigen::Index>(i)).transpose();
        }
        params.transitions->ensure_grad() += gy * g.d_transitions;
        params.start->ensure_grad().col(0) += gy * g.d_start;
        params.end->ensure_grad().col(0) += gy * g.d_end;
      });
  return y;
}

std::vector<int> crf_decode(const std::vector<Vec>& emissions, const CrfParams& params,
                            bool constrained) {
  if (emissions.empty()) {
    throw ContractError("crf: lattice must cover at least one position");
  }
  LatticeScores lattice;
  lattice.emissions.resize(static_cast<Eigen::Index>(emissions.size()), kNumTags);
  for (std::size_t i = 0; i < emissions.size(); ++i) {
    lattice.emissions.row(static_cast<Eigen::Index>(i)) = emissions[i].transpose();
  }
  lattice.transitions = params.transitions->value;
  lattice.start = params.start->value.col(0);
  lattice.end = params.end->value.col(0);
  return viterbi(lattice, constrained);
}

std::vector<int> tags_to_ints(const TagSequence& tags) {
  std::vector<int> out(tags.size());
  for (std::size_t i = 0; i < tags.size(); ++i) {
    out[i] = static_cast<int>(tags[i]);
  }
  return out;
}

TagSequence ints_to_tags(const std::vector<int>& ids) {
  TagSequence out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= kNumTags) {
      throw ContractError("ints_to_tags: tag index out of range");
    }
    out[i] = static_cast<Tag>(ids[i]);
  }
  return out;
}

}  // namespace ate
