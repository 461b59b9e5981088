#include "graphmerge/nmt/autograd.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace graphmerge::nmt {

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::param(Parameter& p) {
  Node n;
  n.param = &p;
  n.requires_grad = record_ && p.trainable;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

Var Tape::push(Matrix value, bool requires_grad, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_ && requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

const Matrix& Tape::value(Var v) const {
  const auto& n = nodes_[v];
  return n.param ? n.param->value : n.value;
}

Matrix& Tape::grad(Var v) {
  auto& n = nodes_[v];
  if (n.param) {
    if (n.param->grad.rows() != n.param->value.rows() || n.param->grad.cols() != n.param->value.cols()) n.param->zero_grad();
    return n.param->grad;
  }
  if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (!record_) throw ValidationError("backward on a non-recording tape");
  if (value(loss).size() != 1) throw ValidationError("backward needs a scalar loss");
  if (!nodes_[loss].requires_grad) return;
  grad(loss)(0, 0) += 1.0;
  for (Var i = loss + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.backward && n.grad.size() != 0) n.backward(*this, i);
  }
}

SequenceLayout SequenceLayout::from_lengths(std::span<const std::size_t> lengths) {
  SequenceLayout l;
  std::size_t off = 0;
  for (auto len : lengths) {
    l.offsets.push_back(off);
    l.lengths.push_back(len);
    off += len;
  }
  return l;
}

Var matmul(Tape& t, Var a, Var b) {
  Matrix out;
  out.noalias() = t.value(a) * t.value(b);
  return t.push(std::move(out), t.requires_grad(a) || t.requires_grad(b), [a, b](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a)) t.grad(a).noalias() += g * t.value(b).transpose();
    if (t.requires_grad(b)) t.grad(b).noalias() += t.value(a).transpose() * g;
  });
}

Var matmul_nt(Tape& t, Var a, Var b) {
  Matrix out;
  out.noalias() = t.value(a) * t.value(b).transpose();
  return t.push(std::move(out), t.requires_grad(a) || t.requires_grad(b), [a, b](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a)) t.grad(a).noalias() += g * t.value(b);
    if (t.requires_grad(b)) t.grad(b).noalias() += g.transpose() * t.value(a);
  });
}

Var linear(Tape& t, Var x, Var w, Var bias) {
  Matrix out(t.value(x).rows(), t.value(w).cols());
  out.noalias() = t.value(x) * t.value(w);
  out.rowwise() += t.value(bias).row(0);
  const bool req = t.requires_grad(x) || t.requires_grad(w) || t.requires_grad(bias);
  return t.push(std::move(out), req, [x, w, bias](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(x)) t.grad(x).noalias() += g * t.value(w).transpose();
    if (t.requires_grad(w)) t.grad(w).noalias() += t.value(x).transpose() * g;
    if (t.requires_grad(bias)) t.grad(bias).row(0) += g.colwise().sum();
  });
}

Var add(Tape& t, Var a, Var b) {
  Matrix out = t.value(a) + t.value(b);
  return t.push(std::move(out), t.requires_grad(a) || t.requires_grad(b), [a, b](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a)) t.grad(a) += g;
    if (t.requires_grad(b)) t.grad(b) += g;
  });
}

Var add_constant(Tape& t, Var a, const Matrix& c) {
  Matrix out = t.value(a) + c;
  return t.push(std::move(out), t.requires_grad(a), [a](Tape& t, Var self) { t.grad(a) += t.grad(self); });
}

Var scale(Tape& t, Var a, double s) {
  Matrix out = t.value(a) * s;
  return t.push(std::move(out), t.requires_grad(a), [a, s](Tape& t, Var self) { t.grad(a) += s * t.grad(self); });
}

Var relu(Tape& t, Var a) {
  Matrix out = t.value(a).cwiseMax(0.0);
  return t.push(std::move(out), t.requires_grad(a), [a](Tape& t, Var self) {
    t.grad(a).array() += (t.value(a).array() > 0.0).select(t.grad(self).array(), 0.0);
  });
}

Var dropout(Tape& t, Var a, double p, Rng& rng) {
  if (p <= 0.0 || !t.recording()) return a;
  const Matrix& x = t.value(a);
  auto mask = std::make_shared<Matrix>(x.rows(), x.cols());
  const double keep_scale = 1.0 / (1.0 - p);
  double* m = mask->data();
  for (Eigen::Index k = 0; k < mask->size(); ++k) m[k] = rng.bernoulli(p) ? 0.0 : keep_scale;
  Matrix out = x.cwiseProduct(*mask);
  return t.push(std::move(out), t.requires_grad(a),
                [a, mask](Tape& t, Var self) { t.grad(a) += t.grad(self).cwiseProduct(*mask); });
}

Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps) {
  const Matrix& in = t.value(x);
  const auto n = in.cols();
  auto xhat = std::make_shared<Matrix>(in.rows(), n);
  auto inv_std = std::make_shared<Eigen::VectorXd>(in.rows());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const double mean = in.row(r).mean();
    const double var = (in.row(r).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)(r) = inv;
    xhat->row(r) = (in.row(r).array() - mean) * inv;
  }
  Matrix out = xhat->array().rowwise() * t.value(gain).row(0).array();
  out.rowwise() += t.value(bias).row(0);
  const bool req = t.requires_grad(x) || t.requires_grad(gain) || t.requires_grad(bias);
  return t.push(std::move(out), req, [x, gain, bias, xhat, inv_std](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(gain)) t.grad(gain).row(0) += (g.array() * xhat->array()).colwise().sum().matrix();
    if (t.requires_grad(bias)) t.grad(bias).row(0) += g.colwise().sum();
    if (!t.requires_grad(x)) return;
    Matrix dxhat = g.array().rowwise() * t.value(gain).row(0).array();
    Matrix& gx = t.grad(x);
    const double n = static_cast<double>(dxhat.cols());
    for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
      const double sum_d = dxhat.row(r).sum();
      const double sum_dx = dxhat.row(r).dot(xhat->row(r));
      gx.row(r).array() += (*inv_std)(r) / n * (n * dxhat.row(r).array() - sum_d - xhat->row(r).array() * sum_dx);
    }
  });
}

Var gather_rows(Tape& t, Var table, std::span<const Index> ids) {
  const Matrix& tab = t.value(table);
  Matrix out(static_cast<Eigen::Index>(ids.size()), tab.cols());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] >= tab.rows()) throw ValidationError("token index " + std::to_string(ids[k]) + " outside the vocabulary");
    out.row(static_cast<Eigen::Index>(k)) = tab.row(ids[k]);
  }
  auto idx = std::make_shared<std::vector<Index>>(ids.begin(), ids.end());
  return t.push(std::move(out), t.requires_grad(table), [table, idx](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    Matrix& gt = t.grad(table);
    for (std::size_t k = 0; k < idx->size(); ++k) gt.row((*idx)[k]) += g.row(static_cast<Eigen::Index>(k));
  });
}

Var sparse_matmul(Tape& t, const SparseMatrix& g, Var a) {
  if (g.cols() != static_cast<std::size_t>(t.value(a).rows())) throw ValidationError("sparse_matmul: shape mismatch");
  Matrix out = g.multiply(t.value(a));
  const SparseMatrix* gp = &g;
  return t.push(std::move(out), t.requires_grad(a),
                [a, gp](Tape& t, Var self) { t.grad(a) += gp->multiply_transposed(t.grad(self)); });
}

Var attention(Tape& t, Var q, Var k, Var v, const SequenceLayout& q_layout, const SequenceLayout& k_layout,
              std::size_t heads, bool causal) {
  const Matrix& Q = t.value(q);
  const Matrix& K = t.value(k);
  const Matrix& V = t.value(v);
  const auto d = Q.cols();
  if (heads == 0 || d % static_cast<Eigen::Index>(heads) != 0) throw ValidationError("model dimension not divisible by heads");
  if (q_layout.count() != k_layout.count()) throw ValidationError("attention: query and key batch sizes differ");
  const auto dk = d / static_cast<Eigen::Index>(heads);
  const double sc = 1.0 / std::sqrt(static_cast<double>(dk));

  auto probs = std::make_shared<std::vector<Matrix>>();
  probs->reserve(q_layout.count() * heads);
  Matrix out = Matrix::Zero(Q.rows(), d);
  for (std::size_t b = 0; b < q_layout.count(); ++b) {
    const auto qo = static_cast<Eigen::Index>(q_layout.offsets[b]), ql = static_cast<Eigen::Index>(q_layout.lengths[b]);
    const auto ko = static_cast<Eigen::Index>(k_layout.offsets[b]), kl = static_cast<Eigen::Index>(k_layout.lengths[b]);
    if (causal && ql != kl) throw ValidationError("causal attention needs equal query and key lengths");
    for (std::size_t h = 0; h < heads; ++h) {
      const auto c0 = static_cast<Eigen::Index>(h) * dk;
      Matrix s(ql, kl);
      s.noalias() = Q.block(qo, c0, ql, dk) * K.block(ko, c0, kl, dk).transpose();
      s *= sc;
      for (Eigen::Index i = 0; i < ql; ++i) {
        const Eigen::Index visible = causal ? i + 1 : kl;
        const double mx = s.row(i).head(visible).maxCoeff();
        double z = 0.0;
        for (Eigen::Index j = 0; j < kl; ++j) {
          const double e = j < visible ? std::exp(s(i, j) - mx) : 0.0;
          s(i, j) = e;
          z += e;
        }
        s.row(i) /= z;
      }
      out.block(qo, c0, ql, dk).noalias() = s * V.block(ko, c0, kl, dk);
      probs->push_back(std::move(s));
    }
  }
  const bool req = t.requires_grad(q) || t.requires_grad(k) || t.requires_grad(v);
  return t.push(std::move(out), req, [=](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    const Matrix& Q = t.value(q);
    const Matrix& K = t.value(k);
    const Matrix& V = t.value(v);
    const bool gq = t.requires_grad(q), gk = t.requires_grad(k), gv = t.requires_grad(v);
    std::size_t p = 0;
    for (std::size_t b = 0; b < q_layout.count(); ++b) {
      const auto qo = static_cast<Eigen::Index>(q_layout.offsets[b]), ql = static_cast<Eigen::Index>(q_layout.lengths[b]);
      const auto ko = static_cast<Eigen::Index>(k_layout.offsets[b]), kl = static_cast<Eigen::Index>(k_layout.lengths[b]);
      for (std::size_t h = 0; h < heads; ++h, ++p) {
        const auto c0 = static_cast<Eigen::Index>(h) * dk;
        const Matrix& P = (*probs)[p];
        const auto dO = g.block(qo, c0, ql, dk);
        if (gv) t.grad(v).block(ko, c0, kl, dk).noalias() += P.transpose() * dO;
        if (!gq && !gk) continue;
        Matrix dP(ql, kl);
        dP.noalias() = dO * V.block(ko, c0, kl, dk).transpose();
        const Eigen::VectorXd row_dot = (dP.array() * P.array()).rowwise().sum();
        Matrix dS = P.array() * (dP.array().colwise() - row_dot.array());
        dS *= sc;
        if (gq) t.grad(q).block(qo, c0, ql, dk).noalias() += dS * K.block(ko, c0, kl, dk);
        if (gk) t.grad(k).block(ko, c0, kl, dk).noalias() += dS.transpose() * Q.block(qo, c0, ql, dk);
      }
    }
  });
}

CrossEntropy cross_entropy(Tape& t, Var logits, std::span<const Index> targets, double smoothing) {
  const Matrix& L = t.value(logits);
  if (static_cast<std::size_t>(L.rows()) != targets.size()) throw ValidationError("cross_entropy: one target per row required");
  if (targets.empty()) throw ValidationError("cross_entropy: no targets");
  const auto vocab = L.cols();
  CrossEntropy ce;
  ce.tokens = targets.size();
  auto probs = std::make_shared<Matrix>(L.rows(), vocab);
  for (Eigen::Index r = 0; r < L.rows(); ++r) {
    const Index y = targets[static_cast<std::size_t>(r)];
    if (y >= vocab) throw ValidationError("target index " + std::to_string(y) + " outside the vocabulary");
    Eigen::Index arg = 0;
    const double mx = L.row(r).maxCoeff(&arg);
    const double lse = mx + std::log((L.row(r).array() - mx).exp().sum());
    probs->row(r) = (L.row(r).array() - lse).exp();
    const double nll = lse - L(r, y);
    const double uniform_nll = lse - L.row(r).mean();
    ce.nll_sum += nll;
    ce.smoothed_sum += (1.0 - smoothing) * nll + smoothing * uniform_nll;
    if (static_cast<Index>(arg) == y) ++ce.correct;
  }
  Matrix loss(1, 1);
  loss(0, 0) = ce.smoothed_sum / static_cast<double>(ce.tokens);
  auto ys = std::make_shared<std::vector<Index>>(targets.begin(), targets.end());
  ce.loss = t.push(std::move(loss), t.requires_grad(logits), [logits, probs, ys, smoothing](Tape& t, Var self) {
    const double g = t.grad(self)(0, 0) / static_cast<double>(ys->size());
    Matrix& gl = t.grad(logits);
    const double off = smoothing / static_cast<double>(probs->cols());
    for (Eigen::Index r = 0; r < probs->rows(); ++r) {
      gl.row(r).array() += g * (probs->row(r).array() - off);
      gl(r, (*ys)[static_cast<std::size_t>(r)]) -= g * (1.0 - smoothing);
    }
  });
  return ce;
}

}  // namespace graphmerge::nmt
