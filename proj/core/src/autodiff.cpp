#include "pdra/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <fmt/core.h>

#include "pdra/error.hpp"

namespace pdra::ad {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Tape& tape_of(std::initializer_list<Var> vars) {
  Tape* t = nullptr;
  for (const Var& v : vars) {
    if (!v.valid()) fail(ErrorCode::kShapeMismatch, "operation on an empty variable");
    if (t && v.tape() != t) fail(ErrorCode::kShapeMismatch, "variables live on different tapes");
    t = v.tape();
  }
  return *t;
}

void expect(bool ok, const char* op, Eigen::Index ar, Eigen::Index ac, Eigen::Index br,
            Eigen::Index bc) {
  if (!ok) {
    fail(ErrorCode::kShapeMismatch, fmt::format("{}: {}x{} vs {}x{}", op, ar, ac, br, bc));
  }
}

double stable_sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

const Matrix& Var::value() const { return tape_->value_at(id_); }

Var Tape::push(Matrix value, Backward backward, const std::vector<int>& inputs) {
  const bool keep =
      record_ && std::any_of(inputs.begin(), inputs.end(), [&](int id) { return needs(id); });
  nodes_.push_back({std::move(value), Matrix(), keep ? std::move(backward) : Backward()});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back({std::move(value), Matrix(), Backward()});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(const Parameter& p) {
  if (auto it = params_.find(&p); it != params_.end()) return Var(this, it->second);
  // Leaves carry a no-op backward so that ops treat them as trainable.
  Backward leaf;
  if (record_) leaf = [](Tape&, int) {};
  nodes_.push_back({p.value, Matrix(), std::move(leaf)});
  const int id = static_cast<int>(nodes_.size()) - 1;
  params_.emplace(&p, id);
  return Var(this, id);
}

Matrix& Tape::grad_at(int id) {
  auto& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var out) {
  if (!record_) fail(ErrorCode::kShapeMismatch, "backward on a non-recording tape");
  if (out.tape() != this || out.rows() != 1 || out.cols() != 1) {
    fail(ErrorCode::kShapeMismatch, "backward needs a 1x1 output on this tape");
  }
  grad_at(out.id())(0, 0) += 1.0;
  for (int i = out.id(); i >= 0; --i) {
    auto& n = nodes_[i];
    if (n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, i);
  }
}

Matrix Tape::grad_of(const Parameter& p) const {
  auto it = params_.find(&p);
  if (it == params_.end() || nodes_[it->second].grad.size() == 0) {
    return Matrix::Zero(p.value.rows(), p.value.cols());
  }
  return nodes_[it->second].grad;
}

const Matrix& Tape::grad(Var v) const { return nodes_[v.id()].grad; }

Var matmul(Var a, Var b) {
  Tape& t = tape_of({a, b});
  expect(a.cols() == b.rows(), "matmul", a.rows(), a.cols(), b.rows(), b.cols());
  const int ia = a.id(), ib = b.id();
  Matrix out = a.value() * b.value();
  return t.push(std::move(out), [ia, ib](Tape& t, int self) {
    const Matrix& g = t.upstream(self);
    t.grad_at(ia).noalias() += g * t.value_at(ib).transpose();
    t.grad_at(ib).noalias() += t.value_at(ia).transpose() * g;
  }, {ia, ib});
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of({a, b});
  expect(a.cols() == b.cols(), "matmul_nt", a.rows(), a.cols(), b.rows(), b.cols());
  const int ia = a.id(), ib = b.id();
  Matrix out = a.value() * b.value().transpose();
  return t.push(std::move(out), [ia, ib](Tape& t, int self) {
    const Matrix& g = t.upstream(self);
    t.grad_at(ia).noalias() += g * t.value_at(ib);
    t.grad_at(ib).noalias() += g.transpose() * t.value_at(ia);
  }, {ia, ib});
}

Var add(Var a, Var b) {
  Tape& t = tape_of({a, b});
  expect(a.rows() == b.rows() && a.cols() == b.cols(), "add", a.rows(), a.cols(), b.rows(),
         b.cols());
  const int ia = a.id(), ib = b.id();
  Matrix out = a.value() + b.value();
  return t.push(std::move(out), [ia, ib](Tape& t, int self) {
    const Matrix& g = t.upstream(self);
    t.grad_at(ia) += g;
    t.grad_at(ib) += g;
  }, {ia, ib});
}

Var sub(Var a, Var b) {
  Tape& t = tape_of({a, b});
  expect(a.rows() == b.rows() && a.cols() == b.cols(), "sub", a.rows(), a.cols(), b.rows(),
         b.cols());
  const int ia = a.id(), ib = b.id();
  Matrix out = a.value() - b.value();
  return t.push(std::move(out), [ia, ib](Tape& t, int self) {
    const Matrix& g = t.upstream(self);
    t.grad_at(ia) += g;
    t.grad_at(ib) -= g;
  }, {ia, ib});
}

Var mul(Var a, Var b) {
  Tape& t = tape_of({a, b});
  expect(a.rows() == b.rows() && a.cols() == b.cols(), "mul", a.rows(), a.cols(), b.rows(),
         b.cols());
  const int ia = a.id(), ib = b.id();
  Matrix out = a.value().cwiseProduct(b.value());
  return t.push(std::move(out), [ia, ib](Tape& t, int self) {
    const Matrix& g = t.upstream(self);
    t.grad_at(ia) += g.cwiseProduct(t.value_at(ib));
    t.grad_at(ib) += g.cwiseProduct(t.value_at(ia));
  }, {ia, ib});
}

Var scale(Var a, double s) {
  Tape& t = tape_of({a});
  const int ia = a.id();
  Matrix out = a.value() * s;
  return t.push(std::move(out), [ia, s](Tape& t, int self) { t.grad_at(ia) += s * t.upstream(self); },
                {ia});
}

Var add_bias(Var a, Var bias) {
  Tape& t = tape_of({a, bias});
  expect(bias.rows() == 1 && bias.cols() == a.cols(), "add_bias", a.rows(), a.cols(),
         bias.rows(), bias.cols());
  const int ia = a.id(), ib = bias.id();
  Matrix out = a.value().rowwise() + bias.value().row(0);
  return t.push(std::move(out), [ia, ib](Tape& t, int self) {
    const Matrix& g = t.upstream(self);
    t.grad_at(ia) += g;
    t.grad_at(ib) += g.colwise().sum();
  }, {ia, ib});
}

Var relu(Var a) {
  Tape& t = tape_of({a});
  const int ia = a.id();
  Matrix out = a.value().cwiseMax(0.0);
  return t.push(std::move(out), [ia](Tape& t, int self) {
    const Matrix& g = t.upstream(self);
    const Matrix& x = t.value_at(ia);
    t.grad_at(ia) += (x.array() > 0.0).select(g, 0.0).matrix();
  }, {ia});
}

Var tanh(Var a) {
  Tape& t = tape_of({a});
  const int ia = a.id();
  Matrix out = a.value().array().tanh().matrix();
  return t.push(std::move(out), [ia](Tape& t, int self) {
    const Matrix& y = t.value_at(self);
    t.grad_at(ia) += t.upstream(self).cwiseProduct((1.0 - y.array().square()).matrix());
  }, {ia});
}

Var sigmoid(Var a) {
  Tape& t = tape_of({a});
  const int ia = a.id();
  Matrix out = a.value().unaryExpr(&stable_sigmoid);
  return t.push(std::move(out), [ia](Tape& t, int self) {
    const Matrix& y = t.value_at(self);
    t.grad_at(ia) += t.upstream(self).cwiseProduct((y.array() * (1.0 - y.array())).matrix());
  }, {ia});
}

Var swish(Var a) {
  Tape& t = tape_of({a});
  const int ia = a.id();
  const Matrix& x = a.value();
  Matrix out = x.cwiseProduct(x.unaryExpr(&stable_sigmoid));
  return t.push(std::move(out), [ia](Tape& t, int self) {
    const Matrix& x = t.value_at(ia);
    const Eigen::ArrayXXd s = x.unaryExpr(&stable_sigmoid).array();
    const Eigen::ArrayXXd d = s + x.array() * s * (1.0 - s);
    t.grad_at(ia) += (t.upstream(self).array() * d).matrix();
  }, {ia});
}

Var rms_norm(Var x, Var gain, double eps) {
  Tape& t = tape_of({x, gain});
  expect(gain.rows() == 1 && gain.cols() == x.cols(), "rms_norm", x.rows(), x.cols(),
         gain.rows(), gain.cols());
  const int ix = x.id(), ig = gain.id();
  const Matrix& xv = x.value();
  const auto d = static_cast<double>(xv.cols());
  Eigen::VectorXd inv(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    inv(r) = 1.0 / std::sqrt(xv.row(r).squaredNorm() / d + eps);
  }
  Matrix out = (xv.array().colwise() * inv.array()).rowwise() * gain.value().row(0).array();
  return t.push(std::move(out), [ix, ig, inv, d](Tape& t, int self) {
    const Matrix& g = t.upstream(self);
    const Matrix& xv = t.value_at(ix);
    const Matrix xhat = (xv.array().colwise() * inv.array()).matrix();
    const Matrix& gv = t.value_at(ig);
    t.grad_at(ig) += g.cwiseProduct(xhat).colwise().sum();
    const Matrix dxhat = (g.array().rowwise() * gv.row(0).array()).matrix();
    Matrix& dx = t.grad_at(ix);
    for (Eigen::Index r = 0; r < xv.rows(); ++r) {
      const double m = dxhat.row(r).dot(xhat.row(r)) / d;
      dx.row(r) += inv(r) * (dxhat.row(r) - m * xhat.row(r));
    }
  }, {ix, ig});
}

Var instance_norm(Var x, Var gain, Var bias, double eps) {
  Tape& t = tape_of({x, gain, bias});
  expect(gain.rows() == 1 && gain.cols() == x.cols() && bias.rows() == 1 &&
             bias.cols() == x.cols(),
         "instance_norm", x.rows(), x.cols(), gain.rows(), gain.cols());
  const int ix = x.id(), ig = gain.id(), ib = bias.id();
  const Matrix& xv = x.value();
  const auto n = static_cast<double>(xv.rows());
  const Eigen::RowVectorXd mean = xv.colwise().mean();
  const Matrix centered = xv.rowwise() - mean;
  const Eigen::RowVectorXd inv =
      ((centered.array().square().colwise().sum() / n) + eps).rsqrt().matrix();
  Matrix xhat = (centered.array().rowwise() * inv.array()).matrix();
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() +
               bias.value().row(0).array();
  return t.push(std::move(out), [ix, ig, ib, inv, xhat, n](Tape& t, int self) {
    const Matrix& g = t.upstream(self);
    t.grad_at(ib) += g.colwise().sum();
    t.grad_at(ig) += g.cwiseProduct(xhat).colwise().sum();
    const Matrix dxhat = (g.array().rowwise() * t.value_at(ig).row(0).array()).matrix();
    const Eigen::RowVectorXd s1 = dxhat.colwise().sum();
    const Eigen::RowVectorXd s2 = dxhat.cwiseProduct(xhat).colwise().sum();
    const Matrix inner = ((dxhat * n).rowwise() - s1) - (xhat.array().rowwise() * s2.array()).matrix();
    t.grad_at(ix) += ((inner.array().rowwise() * inv.array()) / n).matrix();
  }, {ix, ig, ib});
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) fail(ErrorCode::kShapeMismatch, "concat_cols of nothing");
  Tape& t = tape_of({parts[0]});
  Eigen::Index cols = 0;
  std::vector<int> ids;
  for (const Var& p : parts) {
    tape_of({parts[0], p});
    expect(p.rows() == parts[0].rows(), "concat_cols", p.rows(), p.cols(), parts[0].rows(),
           parts[0].cols());
    cols += p.cols();
    ids.push_back(p.id());
  }
  Matrix out(parts[0].rows(), cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return t.push(std::move(out), [ids](Tape& t, int self) {
    const Matrix& g = t.upstream(self);
    Eigen::Index at = 0;
    for (int id : ids) {
      const auto c = t.value_at(id).cols();
      t.grad_at(id) += g.middleCols(at, c);
      at += c;
    }
  }, ids);
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) fail(ErrorCode::kShapeMismatch, "concat_rows of nothing");
  Tape& t = tape_of({parts[0]});
  Eigen::Index rows = 0;
  std::vector<int> ids;
  for (const Var& p : parts) {
    tape_of({parts[0], p});
    expect(p.cols() == parts[0].cols(), "concat_rows", p.rows(), p.cols(), parts[0].rows(),
           parts[0].cols());
    rows += p.rows();
    ids.push_back(p.id());
  }
  Matrix out(rows, parts[0].cols());
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return t.push(std::move(out), [ids](Tape& t, int self) {
    const Matrix& g = t.upstream(self);
    Eigen::Index at = 0;
    for (int id : ids) {
      const auto r = t.value_at(id).rows();
      t.grad_at(id) += g.middleRows(at, r);
      at += r;
    }
  }, ids);
}

Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count) {
  Tape& t = tape_of({a});
  expect(begin >= 0 && count >= 0 && begin + count <= a.cols(), "slice_cols", a.rows(), a.cols(),
         begin, count);
  const int ia = a.id();
  Matrix out = a.value().middleCols(begin, count);
  return t.push(std::move(out), [ia, begin, count](Tape& t, int self) {
    t.grad_at(ia).middleCols(begin, count) += t.upstream(self);
  }, {ia});
}

Var gather_rows(Var a, const std::vector<int>& rows) {
  Tape& t = tape_of({a});
  const int ia = a.id();
  const Matrix& av = a.value();
  Matrix out(static_cast<Eigen::Index>(rows.size()), av.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= av.rows()) {
      fail(ErrorCode::kShapeMismatch, fmt::format("gather_rows: row {} of {}", rows[r], av.rows()));
    }
    out.row(static_cast<Eigen::Index>(r)) = av.row(rows[r]);
  }
  return t.push(std::move(out), [ia, rows](Tape& t, int self) {
    const Matrix& g = t.upstream(self);
    Matrix& ga = t.grad_at(ia);
    for (std::size_t r = 0; r < rows.size(); ++r) ga.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
  }, {ia});
}

Var mean_rows(Var a) {
  Tape& t = tape_of({a});
  const int ia = a.id();
  Matrix out = a.value().colwise().mean();
  return t.push(std::move(out), [ia](Tape& t, int self) {
    Matrix& ga = t.grad_at(ia);
    const auto n = static_cast<double>(ga.rows());
    ga.rowwise() += t.upstream(self).row(0) / n;
  }, {ia});
}

Var sum(Var a) {
  Tape& t = tape_of({a});
  const int ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.push(std::move(out), [ia](Tape& t, int self) {
    t.grad_at(ia).array() += t.upstream(self)(0, 0);
  }, {ia});
}

Var weighted_sum(Var a, const Matrix& weights) {
  Tape& t = tape_of({a});
  expect(weights.rows() == a.rows() && weights.cols() == a.cols(), "weighted_sum", a.rows(),
         a.cols(), weights.rows(), weights.cols());
  const int ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().cwiseProduct(weights).sum();
  return t.push(std::move(out), [ia, weights](Tape& t, int self) {
    t.grad_at(ia) += t.upstream(self)(0, 0) * weights;
  }, {ia});
}

Var pick(Var a, const std::vector<int>& cols) {
  Tape& t = tape_of({a});
  expect(static_cast<Eigen::Index>(cols.size()) == a.rows(), "pick", a.rows(), a.cols(),
         static_cast<Eigen::Index>(cols.size()), 1);
  const int ia = a.id();
  const Matrix& av = a.value();
  Matrix out = Matrix::Zero(av.rows(), 1);
  for (Eigen::Index r = 0; r < av.rows(); ++r) {
    if (cols[r] >= av.cols()) fail(ErrorCode::kShapeMismatch, "pick: column out of range");
    if (cols[r] >= 0) out(r, 0) = av(r, cols[r]);
  }
  return t.push(std::move(out), [ia, cols](Tape& t, int self) {
    const Matrix& g = t.upstream(self);
    Matrix& ga = t.grad_at(ia);
    for (std::size_t r = 0; r < cols.size(); ++r) {
      if (cols[r] >= 0) ga(static_cast<Eigen::Index>(r), cols[r]) += g(static_cast<Eigen::Index>(r), 0);
    }
  }, {ia});
}

Var masked_log_softmax(Var logits, const BoolMatrix& mask) {
  Tape& t = tape_of({logits});
  const Matrix& x = logits.value();
  expect(mask.rows() == x.rows() && mask.cols() == x.cols(), "masked_log_softmax", x.rows(),
         x.cols(), mask.rows(), mask.cols());
  const int ix = logits.id();
  Matrix out(x.rows(), x.cols());
  std::vector<char> empty(static_cast<std::size_t>(x.rows()), 0);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double m = kNegInf;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (mask(r, c)) m = std::max(m, x(r, c));
    }
    if (m == kNegInf) {
      out.row(r).setZero();
      empty[r] = 1;
      continue;
    }
    double s = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (mask(r, c)) s += std::exp(x(r, c) - m);
    }
    const double lse = m + std::log(s);
    for (Eigen::Index c = 0; c < x.cols(); ++c) out(r, c) = mask(r, c) ? x(r, c) - lse : kNegInf;
  }
  return t.push(std::move(out), [ix, mask, empty](Tape& t, int self) {
    const Matrix& g = t.upstream(self);
    const Matrix& y = t.value_at(self);
    Matrix& gx = t.grad_at(ix);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      if (empty[r]) continue;
      double gs = 0.0;
      for (Eigen::Index c = 0; c < y.cols(); ++c) {
        if (mask(r, c)) gs += g(r, c);
      }
      for (Eigen::Index c = 0; c < y.cols(); ++c) {
        if (mask(r, c)) gx(r, c) += g(r, c) - std::exp(y(r, c)) * gs;
      }
    }
  }, {ix});
}

namespace {

// Scores of one head against keys [k0, k0 + kn), with the mask applied.
Matrix head_scores(const Matrix& q, const Matrix& k, Eigen::Index col, Eigen::Index dh,
                   Eigen::Index k0, Eigen::Index kn, double sc, const BoolMatrix* mask) {
  Matrix s = (q.middleCols(col, dh) * k.block(k0, col, kn, dh).transpose()) * sc;
  if (mask) {
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      for (Eigen::Index c = 0; c < kn; ++c) {
        if (!(*mask)(r, k0 + c)) s(r, c) = kNegInf;
      }
    }
  }
  return s;
}

}  // namespace

Var attention(Var q, Var k, Var v, const AttentionOptions& options) {
  Tape& t = tape_of({q, k, v});
  const Matrix& qv = q.value();
  const Matrix& kv = k.value();
  const Matrix& vv = v.value();
  expect(qv.cols() == kv.cols() && kv.rows() == vv.rows() && vv.cols() == qv.cols(), "attention",
         qv.rows(), qv.cols(), kv.rows(), kv.cols());
  if (!qv.allFinite() || !kv.allFinite() || !vv.allFinite()) {
    fail(ErrorCode::kNonFiniteActivation, "attention input is not finite");
  }
  const int heads = options.heads;
  if (heads < 1 || qv.cols() % heads != 0) {
    fail(ErrorCode::kShapeMismatch,
         fmt::format("attention: width {} not divisible by {} heads", qv.cols(), heads));
  }
  const BoolMatrix* mask = options.mask;
  if (mask) expect(mask->rows() == qv.rows() && mask->cols() == kv.rows(), "attention mask",
                   mask->rows(), mask->cols(), qv.rows(), kv.rows());
  const Eigen::Index n = qv.rows(), m = kv.rows(), dh = qv.cols() / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  const Eigen::Index block =
      options.kind == AttentionKind::kStandard ? std::max<Eigen::Index>(m, 1)
                                               : std::max(options.block_size, 1);

  Matrix out = Matrix::Zero(n, qv.cols());
  Matrix lse(n, heads);  // log-sum-exp per row and head; -inf when fully masked
  for (int h = 0; h < heads; ++h) {
    const Eigen::Index col = h * dh;
    Eigen::VectorXd run_max = Eigen::VectorXd::Constant(n, kNegInf);
    Eigen::VectorXd run_sum = Eigen::VectorXd::Zero(n);
    Matrix acc = Matrix::Zero(n, dh);
    for (Eigen::Index k0 = 0; k0 < m; k0 += block) {
      const Eigen::Index kn = std::min(block, m - k0);
      Matrix s = head_scores(qv, kv, col, dh, k0, kn, sc, mask);
      for (Eigen::Index r = 0; r < n; ++r) {
        const double tile_max = s.row(r).maxCoeff();
        const double new_max = std::max(run_max(r), tile_max);
        if (new_max == kNegInf) {
          s.row(r).setZero();
          continue;
        }
        const double corr = std::exp(run_max(r) - new_max);
        run_sum(r) *= corr;
        acc.row(r) *= corr;
        for (Eigen::Index c = 0; c < kn; ++c) {
          s(r, c) = std::exp(s(r, c) - new_max);
          run_sum(r) += s(r, c);
        }
        run_max(r) = new_max;
      }
      acc.noalias() += s * vv.block(k0, col, kn, dh);
    }
    for (Eigen::Index r = 0; r < n; ++r) {
      if (run_max(r) == kNegInf) {
        lse(r, h) = kNegInf;
        continue;
      }
      out.block(r, col, 1, dh) = acc.row(r) / run_sum(r);
      lse(r, h) = run_max(r) + std::log(run_sum(r));
    }
  }
  if (!out.allFinite()) fail(ErrorCode::kNonFiniteActivation, "attention produced non-finite values");

  const int iq = q.id(), ik = k.id(), iv = v.id();
  std::optional<BoolMatrix> mask_copy;
  if (mask) mask_copy = *mask;
  return t.push(std::move(out), [iq, ik, iv, heads, dh, sc, block, lse,
                                 mask_copy = std::move(mask_copy)](Tape& t, int self) {
    const Matrix& g = t.upstream(self);
    const Matrix& o = t.value_at(self);
    const Matrix& qv = t.value_at(iq);
    const Matrix& kv = t.value_at(ik);
    const Matrix& vv = t.value_at(iv);
    const BoolMatrix* mask = mask_copy ? &*mask_copy : nullptr;
    const Eigen::Index n = qv.rows(), m = kv.rows();
    Matrix& gq = t.grad_at(iq);
    Matrix& gk = t.grad_at(ik);
    Matrix& gv = t.grad_at(iv);
    for (int h = 0; h < heads; ++h) {
      const Eigen::Index col = h * dh;
      const Matrix go = g.middleCols(col, dh);
      const Eigen::VectorXd dsum = go.cwiseProduct(o.middleCols(col, dh)).rowwise().sum();
      for (Eigen::Index k0 = 0; k0 < m; k0 += block) {
        const Eigen::Index kn = std::min(block, m - k0);
        Matrix p = head_scores(qv, kv, col, dh, k0, kn, sc, mask);
        for (Eigen::Index r = 0; r < n; ++r) {
          if (lse(r, h) == kNegInf) {
            p.row(r).setZero();
            continue;
          }
          for (Eigen::Index c = 0; c < kn; ++c) p(r, c) = std::exp(p(r, c) - lse(r, h));
        }
        gv.block(k0, col, kn, dh).noalias() += p.transpose() * go;
        Matrix ds = go * vv.block(k0, col, kn, dh).transpose();
        ds = (p.array() * (ds.array().colwise() - dsum.array())).matrix();
        gq.middleCols(col, dh).noalias() += (ds * kv.block(k0, col, kn, dh)) * sc;
        gk.block(k0, col, kn, dh).noalias() += (ds.transpose() * qv.middleCols(col, dh)) * sc;
      }
    }
  }, {iq, ik, iv});
}

Matrix attention_weights(const Matrix& q, const Matrix& k, const BoolMatrix* mask) {
  if (q.cols() != k.cols()) {
    fail(ErrorCode::kShapeMismatch, "attention_weights: query and key widths differ");
  }
  const double sc = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Matrix s = head_scores(q, k, 0, q.cols(), 0, k.rows(), sc, mask);
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    if (mx == kNegInf) {
      s.row(r).setZero();
      continue;
    }
    s.row(r) = (s.row(r).array() - mx).unaryExpr([](double x) { return std::exp(x); }).matrix();
    s.row(r) /= s.row(r).sum();
  }
  return s;
}

}  // namespace pdra::ad
