#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "graphmerge/common.hpp"
#include "graphmerge/rng.hpp"
#include "graphmerge/sparse.hpp"

namespace graphmerge::nmt {

/// A trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

using Var = std::size_t;

/// Reverse-mode tape. Ops append nodes with a closure that pushes the
/// node's gradient into its inputs; backward() replays them in reverse.
/// A non-recording tape only evaluates values (inference).
class Tape {
 public:
  using Backward = std::function<void(Tape&, Var)>;

  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  Var constant(Matrix value);
  /// Gradients of a parameter node go straight into Parameter::grad.
  Var param(Parameter& p);
  Var push(Matrix value, bool requires_grad, Backward backward);

  const Matrix& value(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v].requires_grad; }
  /// Gradient buffer of `v`, zero-initialized on first access.
  Matrix& grad(Var v);

  /// Seeds d(loss)/d(loss) = 1 for a 1x1 node and runs the closures.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Parameter* param = nullptr;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::deque<Node> nodes_;
  bool record_;
};

/// Row ranges of the sequences packed into one matrix.
struct SequenceLayout {
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> lengths;

  static SequenceLayout from_lengths(std::span<const std::size_t> lengths);
  std::size_t total() const { return offsets.empty() ? 0 : offsets.back() + lengths.back(); }
  std::size_t count() const { return lengths.size(); }
};

Var matmul(Tape& t, Var a, Var b);
/// a * transpose(b)
Var matmul_nt(Tape& t, Var a, Var b);
/// x * w + bias (bias is 1 x out, broadcast over rows)
Var linear(Tape& t, Var x, Var w, Var bias);
Var add(Tape& t, Var a, Var b);
Var add_constant(Tape& t, Var a, const Matrix& c);
Var scale(Tape& t, Var a, double s);
Var relu(Tape& t, Var a);
/// Inverted dropout; identity when `p` is 0 or the tape is not recording.
Var dropout(Tape& t, Var a, double p, Rng& rng);
Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps = 1e-5);
/// out.row(k) = table.row(ids[k]); gradients scatter-add back.
Var gather_rows(Tape& t, Var table, std::span<const Index> ids);
/// g * a for a constant sparse g that must outlive the tape.
Var sparse_matmul(Tape& t, const SparseMatrix& g, Var a);

/// Scaled dot-product attention over packed sequences, `heads` heads.
/// Query sequence b attends to key sequence b. `causal` masks future keys
/// (query and key layouts must then coincide).
Var attention(Tape& t, Var q, Var k, Var v, const SequenceLayout& q_layout, const SequenceLayout& k_layout,
              std::size_t heads, bool causal);

struct CrossEntropy {
  Var loss = 0;            ///< 1x1: mean label-smoothed loss per target token
  double smoothed_sum = 0; ///< sum of per-token label-smoothed losses
  double nll_sum = 0;      ///< sum of -log p(target)
  std::size_t tokens = 0;
  std::size_t correct = 0; ///< argmax == target
};

/// (1 - eps) * -log p_y + eps * mean_k(-log p_k), averaged over rows.
CrossEntropy cross_entropy(Tape& t, Var logits, std::span<const Index> targets, double smoothing);

}  // namespace graphmerge::nmt
