#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace pdra::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A named trainable matrix. Tapes read it; gradients live on the tape.
struct Parameter {
  std::string name;
  Matrix value;
};

class Tape;

/// Handle to a tape node. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape over row-major double matrices. A tape built with
/// record = false keeps values only (inference).
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  /// Leaf reading `p`; repeated calls on one tape return the same node.
  Var param(const Parameter& p);

  /// Seeds d(out)/d(out) = 1 for a 1x1 `out` and propagates.
  void backward(Var out);
  /// Gradient accumulated for `p` by backward(); zero when `p` was unused.
  Matrix grad_of(const Parameter& p) const;
  const Matrix& grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

  // Op plumbing.
  using Backward = std::function<void(Tape&, int self)>;
  /// Keeps `backward` only when some input needs a gradient.
  Var push(Matrix value, Backward backward, const std::vector<int>& inputs);
  bool needs(int id) const { return static_cast<bool>(nodes_[id].backward); }
  const Matrix& value_at(int id) const { return nodes_[id].value; }
  Matrix& grad_at(int id);
  const Matrix& upstream(int id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
  };
  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> params_;
};

Var matmul(Var a, Var b);
/// a * b^T.
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
/// a + bias with bias 1 x cols broadcast over rows.
Var add_bias(Var a, Var bias);

Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var swish(Var a);  // z * sigmoid(z)

/// x / sqrt(mean(x^2) + eps) * g per row; g is 1 x cols.
Var rms_norm(Var x, Var gain, double eps = 1e-8);
/// Per-feature standardization across rows, then gain and bias.
Var instance_norm(Var x, Var gain, Var bias, double eps = 1e-5);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count);
Var gather_rows(Var a, const std::vector<int>& rows);
Var mean_rows(Var a);  // 1 x cols
Var sum(Var a);        // 1 x 1
/// sum(a .* weights) with constant weights of a's shape.
Var weighted_sum(Var a, const Matrix& weights);
/// out(r) = a(r, cols[r]); a negative column gives 0.
Var pick(Var a, const std::vector<int>& cols);

/// Row-wise log-softmax over the unmasked entries (mask true = allowed).
/// Masked entries are -inf; a fully masked row is all zeros.
Var masked_log_softmax(Var logits, const BoolMatrix& mask);

enum class AttentionKind { kBlockwise, kStandard };

struct AttentionOptions {
  int heads = 1;
  AttentionKind kind = AttentionKind::kBlockwise;
  int block_size = 32;           // keys per tile (blockwise)
  const BoolMatrix* mask = nullptr;  // rows(q) x rows(k), true = may attend
};

/// Multi-head scaled dot-product attention over column-split heads, without
/// projections. Blockwise evaluation tiles the keys with an online softmax and
/// recomputes tiles in the backward pass; it computes the same function as
/// the standard form. Fully masked query rows give zero output.
Var attention(Var q, Var k, Var v, const AttentionOptions& options);

/// Attention weights of one head (rows sum to one, masked columns exactly 0).
Matrix attention_weights(const Matrix& q, const Matrix& k, const BoolMatrix* mask = nullptr);

}  // namespace pdra::ad
