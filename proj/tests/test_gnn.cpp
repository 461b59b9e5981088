#include <doctest.h>

#include "graphmerge/gnn.hpp"
#include "graphmerge/graph.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace graphmerge;
using namespace graphmerge::gnn;

namespace {

using Rows = std::vector<std::vector<SparseMatrix::Entry>>;

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double a = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-a, a);
  return m;
}

/// Random row-stochastic graph without self entries; some rows are pure
/// self-loops.
SparseMatrix random_graph(Rng& rng, std::size_t n) {
  Rows rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.bernoulli(0.2)) {
      rows[i] = {{static_cast<Index>(i), 1.0}};
      continue;
    }
    double total = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && rng.bernoulli(0.5)) {
        const double w = rng.uniform(0.1, 1.0);
        rows[i].push_back({static_cast<Index>(j), w});
        total += w;
      }
    if (rows[i].empty()) rows[i] = {{static_cast<Index>((i + 1) % n), 1.0}};
    else
      for (auto& e : rows[i]) e.second /= total;
  }
  return SparseMatrix::from_rows(n, rows);
}

GraphMergeStack random_stack(Rng& rng, std::size_t hops, std::size_t d, Activation act) {
  GraphMergeStack s;
  for (std::size_t t = 0; t < hops; ++t) {
    GraphLayerParams p;
    p.w_self = random_matrix(rng, d, d, 0.8);
    p.w_neighbor = random_matrix(rng, d, d, 0.8);
    p.bias = random_matrix(rng, 1, d, 0.3);
    p.activation = act;
    s.layers.push_back(p);
  }
  return s;
}

/// Scalar probe loss L = sum(C ⊙ H) so dL/dH = C.
double probe(const SparseMatrix& g, const Matrix& x, const GraphMergeStack& s, const Matrix& c) {
  return stack_forward(g, x, s).cwiseProduct(c).sum();
}

}  // namespace

TEST_CASE("sparse matrix products match dense") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto g = random_graph(rng, 9);
    Matrix x = random_matrix(rng, 9, 4);
    const Matrix d = oracle::dense(g);
    CHECK((g.multiply(x) - d * x).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((g.multiply_transposed(x) - d.transpose() * x).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(oracle::dense(g.transposed()) == d.transpose());
  }
  auto dup = SparseMatrix::from_rows(3, Rows{{{2, 1.0}, {0, 0.5}, {2, 0.25}}, {}, {}});
  CHECK(dup.at(0, 2) == 1.25);
  CHECK(dup.row_indices(0)[0] == 0);
  CHECK(SparseMatrix::identity(3).nnz() == 3);
}

TEST_CASE("weighted_sum examples") {
  Matrix x(3, 2);
  x << 5, 6, 2, 0, 0, 2;
  CHECK(weighted_sum(SparseMatrix::identity(3), x) == x);

  auto perm = SparseMatrix::from_rows(3, Rows{{{2, 1.0}}, {{1, 1.0}}, {{2, 1.0}}});
  CHECK(weighted_sum(perm, x).row(0) == x.row(2));

  auto avg = SparseMatrix::from_rows(3, Rows{{{1, 0.5}, {2, 0.5}}, {{1, 1.0}}, {{2, 1.0}}});
  auto out = weighted_sum(avg, x);
  CHECK(out(0, 0) == 1.0);
  CHECK(out(0, 1) == 1.0);

  CHECK_THROWS_AS(weighted_sum(avg, Matrix::Zero(4, 2)), ValidationError);
}

TEST_CASE("weighted_sum output rows are convex combinations") {
  Rng rng(8);
  auto g = random_graph(rng, 12);
  Matrix x = random_matrix(rng, 12, 3);
  auto out = weighted_sum(g, x);
  for (Eigen::Index c = 0; c < 3; ++c) {
    CHECK(out.col(c).maxCoeff() <= x.col(c).maxCoeff() + 1e-12);
    CHECK(out.col(c).minCoeff() >= x.col(c).minCoeff() - 1e-12);
  }
}

TEST_CASE("layer_forward examples") {
  Rng rng(4);
  auto g = random_graph(rng, 5);
  Matrix h = random_matrix(rng, 5, 3);
  CHECK(layer_forward(g, h, GraphLayerParams::identity(3)) == h);

  GraphLayerParams p;
  p.w_self = random_matrix(rng, 3, 3);
  p.w_neighbor = random_matrix(rng, 3, 3);
  p.bias = RowVector(3);
  p.bias << -1.0, 0.5, 2.0;
  p.activation = Activation::kRelu;
  auto z = layer_forward(g, Matrix::Zero(5, 3), p);
  for (Eigen::Index r = 0; r < 5; ++r) {
    CHECK(z(r, 0) == 0.0);
    CHECK(z(r, 1) == 0.5);
    CHECK(z(r, 2) == 2.0);
  }

  // d = 1: h_i = 2, neighbour h_j = 4 with alpha 0.5, W1 = W2 = 1, b = 0
  auto g2 = SparseMatrix::from_rows(2, Rows{{{1, 0.5}}, {{1, 1.0}}});
  Matrix h2(2, 1);
  h2 << 2, 4;
  GraphLayerParams s;
  s.w_self = Matrix::Constant(1, 1, 1.0);
  s.w_neighbor = Matrix::Constant(1, 1, 1.0);
  s.bias = RowVector::Zero(1);
  s.activation = Activation::kRelu;
  CHECK(layer_forward(g2, h2, s)(0, 0) == 4.0);

  // self-loop row: relu(h W1 + alpha_ii h W2 + b)
  CHECK(layer_forward(g2, h2, s)(1, 0) == 8.0);

  CHECK_THROWS_AS(layer_forward(g2, Matrix::Zero(2, 3), s), ValidationError);
  auto nan = s;
  nan.w_self(0, 0) = std::nan("");
  CHECK_THROWS_AS(layer_forward(g2, h2, nan), ValidationError);
}

TEST_CASE("stack_forward composition") {
  Rng rng(5);
  auto g = random_graph(rng, 6);
  Matrix x = random_matrix(rng, 6, 4);
  auto one = random_stack(rng, 1, 4, Activation::kRelu);
  CHECK(stack_forward(g, x, one) == layer_forward(g, x, one.layers[0]));
  CHECK(stack_forward(g, x, GraphMergeStack::identity(2, 4)) == x);
  CHECK(stack_forward(g, x, GraphMergeStack::identity(3, 4)) == x);
  CHECK_THROWS_AS(stack_forward(g, x, GraphMergeStack{}), ValidationError);
  for (std::size_t hops : {1, 2, 3}) {
    auto s = GraphMergeStack::random(hops, 4, 11);
    auto out = stack_forward(g, x, s);
    CHECK(out.rows() == 6);
    CHECK(out.cols() == 4);
    CHECK(s.parameter_count() == hops * (2 * 16 + 4));
  }
}

TEST_CASE("random init scale and determinism") {
  auto a = GraphMergeStack::random(2, 64, 7);
  auto b = GraphMergeStack::random(2, 64, 7);
  CHECK(a.layers[1].w_neighbor == b.layers[1].w_neighbor);
  CHECK(a.layers[0].w_self != GraphMergeStack::random(2, 64, 8).layers[0].w_self);
  const double bound = std::sqrt(3.0 / 64);
  CHECK(a.layers[0].w_self.cwiseAbs().maxCoeff() <= bound);
  CHECK(a.layers[0].w_self.cwiseAbs().maxCoeff() > 0.9 * bound);
  CHECK(a.layers[0].bias.isZero());
  auto id = GraphMergeStack::random(1, 64, 7, Activation::kIdentity);
  CHECK(id.layers[0].w_self.cwiseAbs().maxCoeff() <= std::sqrt(1.5 / 64));
}

TEST_CASE("stack_backward: identity and dead relu") {
  Rng rng(6);
  auto g = random_graph(rng, 6);
  Matrix x = random_matrix(rng, 6, 4);
  Matrix up = random_matrix(rng, 6, 4);
  auto grads = stack_backward(g, x, GraphMergeStack::identity(2, 4), up);
  CHECK(grads.x == up);

  auto dead = random_stack(rng, 1, 4, Activation::kRelu);
  dead.layers[0].w_self.setZero();
  dead.layers[0].w_neighbor.setZero();
  dead.layers[0].bias.setConstant(-1.0);
  auto dg = stack_backward(g, x, dead, up);
  CHECK(dg.x.isZero());
  CHECK(dg.layers[0].w_self.isZero());
  CHECK(dg.layers[0].w_neighbor.isZero());
  CHECK(dg.layers[0].bias.isZero());

  CHECK_THROWS_AS(stack_backward(g, x, dead, Matrix::Zero(5, 4)), ValidationError);
}

TEST_CASE("stack_backward matches finite differences") {
  for (auto act : {Activation::kRelu, Activation::kIdentity}) {
    Rng rng(act == Activation::kRelu ? 21 : 22);
    auto g = random_graph(rng, 6);
    Matrix x = random_matrix(rng, 6, 4);
    auto s = random_stack(rng, 2, 4, act);
    Matrix c = random_matrix(rng, 6, 4);
    auto grads = stack_backward(g, x, s, c);

    auto f = [&] { return probe(g, x, s, c); };
    CHECK(oracle::max_rel_error(grads.x, oracle::numeric_grad(x, f)) < 1e-4);
    for (std::size_t t = 0; t < 2; ++t) {
      auto& L = s.layers[t];
      CHECK(oracle::max_rel_error(grads.layers[t].w_self, oracle::numeric_grad(L.w_self, f)) < 1e-4);
      CHECK(oracle::max_rel_error(grads.layers[t].w_neighbor, oracle::numeric_grad(L.w_neighbor, f)) < 1e-4);
      Matrix b = L.bias;
      auto fb = [&] {
        L.bias = b;
        return f();
      };
      const Matrix nb = oracle::numeric_grad(b, fb);
      L.bias = b;
      CHECK(oracle::max_rel_error(grads.layers[t].bias, nb) < 1e-4);
    }
  }
}

TEST_CASE("1-hop sensitivity is confined to the neighbourhood") {
  Rng rng(31);
  const std::size_t n = 10, d = 3;
  Rows rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = {{static_cast<Index>((i + 1) % n), 1.0}};
  rows[4] = {{static_cast<Index>(4), 1.0}};
  rows[7] = {{2, 0.5}, {9, 0.5}};
  EquivalenceGraph graph(SparseMatrix::from_rows(n, rows));
  auto s = random_stack(rng, 1, d, Activation::kIdentity);
  Matrix x = random_matrix(rng, n, d);
  for (Index i = 0; i < n; ++i) {
    auto hood = khop_neighbors(graph, i, 1);
    hood.insert(i);
    Matrix c = Matrix::Zero(n, d);
    c.row(i).setOnes();
    auto gx = stack_backward(graph.matrix(), x, s, c).x;
    for (Index j = 0; j < n; ++j) {
      if (hood.contains(j)) CHECK(gx.row(j).norm() > 0.0);
      else CHECK(gx.row(j).isZero());
    }
  }
}

TEST_CASE("stack file round-trip") {
  testutil::TempDir dir;
  auto s = GraphMergeStack::random(2, 5, 3, Activation::kIdentity);
  save_stack(s, dir / "stack.bin", "p");
  auto back = load_stack(dir / "stack.bin");
  REQUIRE(back.hops() == 2);
  CHECK(back.layers[1].w_neighbor == s.layers[1].w_neighbor);
  CHECK(back.layers[0].bias == s.layers[0].bias);
  CHECK(back.layers[0].activation == Activation::kIdentity);
}
