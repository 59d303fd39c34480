#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ate/rng.hpp"
#include "ate/types.hpp"

namespace ate {

// A named trainable tensor. Vectors are stored as n-by-1 matrices. The grad
// buffer is lazily allocated on first accumulation so that large frozen
// tables (a 2M-word embedding matrix) never pay for one; once allocated it
// always matches the value's shape.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  bool trainable = true;

  Param(std::string name_, Eigen::Index rows, Eigen::Index cols, bool trainable_ = true)
      : name(std::move(name_)), value(Mat::Zero(rows, cols)), trainable(trainable_) {}

  Mat& ensure_grad() {
    if (grad.size() == 0) {
      grad = Mat::Zero(value.rows(), value.cols());
    }
    return grad;
  }
  void zero_grad() {
    if (grad.size() != 0) {
      grad.setZero();
    }
  }
};

// Owns parameters in creation order; pointers stay valid for the store's
// lifetime. Creation order defines the checkpoint layout.
class ParamStore {
 public:
  Param& create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                bool trainable = true);
  Param* find(const std::string& name);
  const Param* find(const std::string& name) const;
  std::vector<Param*> all();
  std::size_t size() const { return params_.size(); }
  void zero_grads();

  // Whole-store value snapshots, used to restore the best epoch during
  // training. Frozen params round-trip unchanged.
  std::vector<Mat> snapshot_values() const;
  void restore_values(const std::vector<Mat>& snap);

  // Flat binary container: magic, version, count, then per-param name, shape
  // and row-major doubles. Round-trips bit-exactly.
  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;
  // Loads into this store; every stored name must match an existing param of
  // identical shape.
  void load(std::istream& in);
  void load_file(const std::string& path);

 private:
  std::deque<Param> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Reverse-mode tape over vector-valued nodes. A forward pass eagerly computes
// values and records one backward closure per primitive; backward() replays
// the closures in exact reverse order, accumulating into node grads and
// additively into Param grads. Param grads are never cleared by the tape, so
// running backward twice doubles them; node grads are reset at the start of
// each backward pass.
class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  const Vec& value(Var v) const { return slots_[check(v)].value; }
  Vec& grad(Var v) { return slots_[check(v)].grad; }
  Eigen::Index size(Var v) const { return slots_[check(v)].value.size(); }

  // Leaf node. Its gradient is readable after backward but nothing upstream
  // receives it.
  Var input(Vec v);

  // affine(x, W, b) = W x + b; pass b = nullptr for a pure matrix product.
  Var affine(Var x, Param& W, Param* b);
  Var add(Var a, Var b);
  Var sigmoid(Var x);
  Var tanh(Var x);
  Var hadamard(Var a, Var b);
  Var concat(Var a, Var b);
  Var embed_row(Param& table, Eigen::Index row);
  Var scale(Var x, double c);
  Var sum(const std::vector<Var>& xs);

  // Scalar node: -log softmax(logits)[target].
  Var softmax_cross_entropy(Var logits, int target);

  // Inverted dropout: in train mode survivors are scaled by 1/(1-rate); in
  // eval mode (or rate 0) the input node is returned untouched. rate must lie
  // in [0, 1).
  Var dropout(Var x, double rate, bool train, Rng& rng);

  // Runs the recorded closures in reverse. `loss` must be scalar.
  void backward(Var loss);

  std::size_t n_records() const { return records_.size(); }
  std::size_t n_backward_executions() const { return executed_; }

  // Extension points for fused ops (the CRF loss) that compute their own
  // gradients: create a node with a precomputed value, then register the
  // closure that scatters gradients when the tape unwinds.
  Var make_node(Vec value);
  void push_backward(std::function<void(Tape&)> fn);

 private:
  struct Slot {
    Vec value;
    Vec grad;
  };
  int check(Var v) const;
  Var new_slot(Vec value);

  std::vector<Slot> slots_;
  std::vector<std::function<void(Tape&)>> records_;
  std::size_t executed_ = 0;
};

// Glorot/Xavier uniform fill with limit sqrt(6 / (rows + cols)).
void glorot_uniform(Mat& m, Rng& rng);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over a ParamStore. Moments are keyed by param name and
// created on first sight; grads of every param are zeroed after the step.
class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}
  const AdamConfig& config() const { return cfg_; }
  long step_count() const { return t_; }
  void step(ParamStore& params);

 private:
  struct Moments {
    Mat m;
    Mat v;
  };
  AdamConfig cfg_;
  long t_ = 0;
  std::unordered_map<std::string, Moments> moments_;
};

struct GradCheckEntry {
  std::string param;
  double worst_rel_err = 0.0;
  Eigen::Index worst_row = 0;
  Eigen::Index worst_col = 0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool pass = true;
  std::string summary() const;
};

// Compares tape gradients against central finite differences on a sampled
// subset of coordinates per parameter. `forward_loss` must be a pure,
// deterministic evaluation of the loss; `compute_grads` must leave fresh
// gradients in the params (zeroing whatever was there before). Relative error
// is |a - b| / max(1, |a| + |b|).
GradCheckReport grad_check(const std::function<double()>& forward_loss,
                           const std::function<void()>& compute_grads,
                           const std::vector<Param*>& params, double tolerance,
                           int samples_per_param, std::uint64_t seed, double h = 1e-5);

}  // namespace ate
