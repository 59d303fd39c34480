#include "ate/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>

namespace ate {

// ---------------------------------------------------------------------------
// ParamStore

Param& ParamStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                          bool trainable) {
  if (index_.count(name) != 0) {
    throw ContractError("ParamStore: duplicate param name '" + name + "'");
  }
  index_.emplace(name, params_.size());
  params_.emplace_back(name, rows, cols, trainable);
  return params_.back();
}

Param* ParamStore::find(const std::string& name) {
  const auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

const Param* ParamStore::find(const std::string& name) const {
  const auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

std::vector<Param*> ParamStore::all() {
  std::vector<Param*> out;
  out.reserve(params_.size());
  for (Param& p : params_) {
    out.push_back(&p);
  }
  return out;
}

void ParamStore::zero_grads() {
  for (Param& p : params_) {
    p.zero_grad();
  }
}

std::vector<Mat> ParamStore::snapshot_values() const {
  std::vector<Mat> snap;
  snap.reserve(params_.size());
  for (const Param& p : params_) {
    snap.push_back(p.value);
  }
  return snap;
}

void ParamStore::restore_values(const std::vector<Mat>& snap) {
  if (snap.size() != params_.size()) {
    throw ContractError("ParamStore::restore_values: snapshot size mismatch");
  }
  for (std::size_t i = 0; i < snap.size(); ++i) {
    params_[i].value = snap[i];
  }
}

namespace {

constexpr char kCheckpointMagic[4] = {'A', 'T', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) {
    throw ParseError("checkpoint: truncated stream");
  }
  return v;
}

}  // namespace

void ParamStore::save(std::ostream& out) const {
  out.write(kCheckpointMagic, 4);
  write_pod(out, kCheckpointVersion);
  write_pod(out, static_cast<std::uint64_t>(params_.size()));
  for (const Param& p : params_) {
    write_pod(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_pod(out, static_cast<std::uint64_t>(p.value.rows()));
    write_pod(out, static_cast<std::uint64_t>(p.value.cols()));
    // Row-major on disk.
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
        write_pod(out, p.value(r, c));
      }
    }
  }
}

void ParamStore::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ParseError("cannot open " + path + " for writing");
  }
  save(out);
}

void ParamStore::load(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw ParseError("checkpoint: bad magic");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = read_pod<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) {
      throw ParseError("checkpoint: truncated name");
    }
    const auto rows = static_cast<Eigen::Index>(read_pod<std::uint64_t>(in));
    const auto cols = static_cast<Eigen::Index>(read_pod<std::uint64_t>(in));
    Param* p = find(name);
    if (p == nullptr) {
      throw ParseError("checkpoint: unknown param '" + name + "'");
    }
    if (p->value.rows() != rows || p->value.cols() != cols) {
      throw ParseError("checkpoint: shape mismatch for '" + name + "'");
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        p->value(r, c) = read_pod<double>(in);
      }
    }
  }
}

void ParamStore::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("cannot open " + path);
  }
  load(in);
}

// ---------------------------------------------------------------------------
// Tape

int Tape::check(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(slots_.size())) {
    throw ContractError("Tape: invalid var handle");
  }
  return v.id;
}

Tape::Var Tape::new_slot(Vec value) {
  Slot s;
  s.grad = Vec::Zero(value.size());
  s.value = std::move(value);
  slots_.push_back(std::move(s));
  return Var{static_cast<int>(slots_.size()) - 1};
}

Tape::Var Tape::input(Vec v) { return new_slot(std::move(v)); }

Tape::Var Tape::make_node(Vec value) { return new_slot(std::move(value)); }

void Tape::push_backward(std::function<void(Tape&)> fn) { records_.push_back(std::move(fn)); }

Tape::Var Tape::affine(Var x, Param& W, Param* b) {
  if (W.value.cols() != size(x)) {
    throw ContractError("affine: " + W.name + " has " + std::to_string(W.value.cols()) +
                        " cols but input has " + std::to_string(size(x)));
  }
  Vec out = W.value * value(x);
  if (b != nullptr) {
    if (b->value.rows() != out.size() || b->value.cols() != 1) {
      throw ContractError("affine: bias " + b->name + " shape mismatch");
    }
    out += b->value.col(0);
  }
  const Var y = new_slot(std::move(out));
  push_backward([x, y, &W, b](Tape& t) {
    const Vec& gy = t.grad(y);
    t.grad(x).noalias() += W.value.transpose() * gy;
    W.ensure_grad().noalias() += gy * t.value(x).transpose();
    if (b != nullptr) {
      b->ensure_grad().col(0) += gy;
    }
  });
  return y;
}

Tape::Var Tape::add(Var a, Var b) {
  if (size(a) != size(b)) {
    throw ContractError("add: size mismatch");
  }
  const Var y = new_slot(value(a) + value(b));
  push_backward([a, b, y](Tape& t) {
    t.grad(a) += t.grad(y);
    t.grad(b) += t.grad(y);
  });
  return y;
}

Tape::Var Tape::sigmoid(Var x) {
  Vec out = value(x).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  const Var y = new_slot(std::move(out));
  push_backward([x, y](Tape& t) {
    const Vec& s = t.value(y);
    t.grad(x).array() += t.grad(y).array() * s.array() * (1.0 - s.array());
  });
  return y;
}

Tape::Var Tape::tanh(Var x) {
  Vec out = value(x).array().tanh();
  const Var y = new_slot(std::move(out));
  push_backward([x, y](Tape& t) {
    const Vec& v = t.value(y);
    t.grad(x).array() += t.grad(y).array() * (1.0 - v.array().square());
  });
  return y;
}

Tape::Var Tape::hadamard(Var a, Var b) {
  if (size(a) != size(b)) {
    throw ContractError("hadamard: size mismatch");
  }
  const Var y = new_slot(value(a).cwiseProduct(value(b)));
  push_backward([a, b, y](Tape& t) {
    t.grad(a).array() += t.grad(y).array() * t.value(b).array();
    t.grad(b).array() += t.grad(y).array() * t.value(a).array();
  });
  return y;
}

Tape::Var Tape::concat(Var a, Var b) {
  Vec out(size(a) + size(b));
  out << value(a), value(b);
  const Var y = new_slot(std::move(out));
  const Eigen::Index na = size(a);
  push_backward([a, b, y, na](Tape& t) {
    const Vec& gy = t.grad(y);
    t.grad(a) += gy.head(na);
    t.grad(b) += gy.tail(gy.size() - na);
  });
  return y;
}

Tape::Var Tape::embed_row(Param& table, Eigen::Index row) {
  if (row < 0 || row >= table.value.rows()) {
    throw ContractError("embed_row: index " + std::to_string(row) + " out of range for " +
                        table.name);
  }
  const Var y = new_slot(table.value.row(row).transpose());
  push_backward([y, &table, row](Tape& t) {
    if (table.trainable) {
      table.ensure_grad().row(row) += t.grad(y).transpose();
    }
  });
  return y;
}

Tape::Var Tape::scale(Var x, double c) {
  const Var y = new_slot(value(x) * c);
  push_backward([x, y, c](Tape& t) { t.grad(x) += c * t.grad(y); });
  return y;
}

Tape::Var Tape::sum(const std::vector<Var>& xs) {
  if (xs.empty()) {
    throw ContractError("sum: empty input");
  }
  Vec out = value(xs[0]);
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (size(xs[i]) != out.size()) {
      throw ContractError("sum: size mismatch");
    }
    out += value(xs[i]);
  }
  const Var y = new_slot(std::move(out));
  push_backward([xs, y](Tape& t) {
    for (const Var x : xs) {
      t.grad(x) += t.grad(y);
    }
  });
  return y;
}

Tape::Var Tape::softmax_cross_entropy(Var logits, int target) {
  const Vec& l = value(logits);
  if (target < 0 || target >= l.size()) {
    throw ContractError("softmax_cross_entropy: target out of range");
  }
  const double m = l.maxCoeff();
  const double lse = m + std::log((l.array() - m).exp().sum());
  Vec loss(1);
  loss[0] = lse - l[target];
  const Var y = new_slot(std::move(loss));
  push_backward([logits, y, target, lse](Tape& t) {
    const double gy = t.grad(y)[0];
    const Vec p = (t.value(logits).array() - lse).exp();
    t.grad(logits) += gy * p;
    t.grad(logits)[target] -= gy;
  });
  return y;
}

Tape::Var Tape::dropout(Var x, double rate, bool train, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ContractError("dropout: rate must be in [0, 1)");
  }
  if (!train || rate == 0.0) {
    return x;
  }
  const double keep = 1.0 - rate;
  Vec mask(size(x));
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask[i] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  }
  const Var y = new_slot(value(x).cwiseProduct(mask));
  push_backward([x, y, mask = std::move(mask)](Tape& t) {
    t.grad(x).array() += t.grad(y).array() * mask.array();
  });
  return y;
}

void Tape::backward(Var loss) {
  if (size(loss) != 1) {
    throw ContractError("backward: loss must be scalar");
  }
  for (Slot& s : slots_) {
    s.grad.setZero();
  }
  grad(loss)[0] = 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    (*it)(*this);
    ++executed_;
  }
}

void glorot_uniform(Mat& m, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = rng.uniform(-limit, limit);
    }
  }
}

// ---------------------------------------------------------------------------
// Adam

void AdamState::step(ParamStore& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Param* p : params.all()) {
    if (p->trainable && p->grad.size() != 0) {
      auto [it, fresh] = moments_.try_emplace(p->name);
      Moments& mo = it->second;
      if (fresh) {
        mo.m = Mat::Zero(p->value.rows(), p->value.cols());
        mo.v = Mat::Zero(p->value.rows(), p->value.cols());
      }
      mo.m = cfg_.beta1 * mo.m + (1.0 - cfg_.beta1) * p->grad;
      mo.v = cfg_.beta2 * mo.v.array() + (1.0 - cfg_.beta2) * p->grad.array().square();
      const Mat m_hat = mo.m / bc1;
      const Mat v_hat = mo.v / bc2;
      p->value.array() -= cfg_.lr * m_hat.array() / (v_hat.array().sqrt() + cfg_.epsilon);
    }
    p->zero_grad();
  }
}

// ---------------------------------------------------------------------------
// Gradient checking

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  for (const GradCheckEntry& e : entries) {
    os << (e.pass ? "ok   " : "FAIL ") << e.param << " worst " << e.worst_rel_err << " at ("
       << e.worst_row << "," << e.worst_col << ")\n";
  }
  return os.str();
}

GradCheckReport grad_check(const std::function<double()>& forward_loss,
                           const std::function<void()>& compute_grads,
                           const std::vector<Param*>& params, double tolerance,
                           int samples_per_param, std::uint64_t seed, double h) {
  compute_grads();
  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (Param* p : params) {
    analytic.push_back(p->grad.size() == 0 ? Mat::Zero(p->value.rows(), p->value.cols())
                                           : p->grad);
  }

  GradCheckReport report;
  Rng rng(seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param& p = *params[pi];
    GradCheckEntry entry;
    entry.param = p.name;
    const Eigen::Index n = p.value.size();
    const int n_samples = std::min<Eigen::Index>(n, samples_per_param);
    for (int s = 0; s < n_samples; ++s) {
      const Eigen::Index flat =
          n <= samples_per_param ? s : static_cast<Eigen::Index>(rng.below(n));
      const Eigen::Index r = flat % p.value.rows();
      const Eigen::Index c = flat / p.value.rows();
      const double saved = p.value(r, c);
      p.value(r, c) = saved + h;
      const double up = forward_loss();
      p.value(r, c) = saved - h;
      const double down = forward_loss();
      p.value(r, c) = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = analytic[pi](r, c);
      const double rel = std::abs(an - fd) / std::max(1.0, std::abs(an) + std::abs(fd));
      if (rel > entry.worst_rel_err) {
        entry.worst_rel_err = rel;
        entry.worst_row = r;
        entry.worst_col = c;
      }
    }
    entry.pass = entry.worst_rel_err <= tolerance;
    report.pass = report.pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace ate
