#include "graphmerge/gnn.hpp"

#include <cmath>
#include <string>

#include "graphmerge/tensor_io.hpp"

namespace graphmerge::gnn {
namespace {

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw ValidationError(std::string("non-finite values in ") + what);
}

void check_layer(const GraphLayerParams& p, std::size_t d) {
  if (p.w_self.rows() != p.w_self.cols() || p.w_neighbor.rows() != p.w_neighbor.cols() ||
      p.w_self.rows() != p.w_neighbor.rows() || p.bias.size() != p.w_self.rows())
    throw ValidationError("graph layer parameters are not square d x d with a length-d bias");
  if (static_cast<std::size_t>(p.w_self.rows()) != d)
    throw ValidationError("graph layer dimension " + std::to_string(p.w_self.rows()) + " does not match embedding dimension " +
                          std::to_string(d));
  check_finite(p.w_self, "W1");
  check_finite(p.w_neighbor, "W2");
  if (!p.bias.allFinite()) throw ValidationError("non-finite values in bias");
}

void check_graph(const SparseMatrix& g, const Matrix& h) {
  if (g.rows() != g.cols() || g.cols() != static_cast<std::size_t>(h.rows()))
    throw ValidationError("graph is " + std::to_string(g.rows()) + "x" + std::to_string(g.cols()) +
                          " but the embedding table has " + std::to_string(h.rows()) + " rows");
}

Matrix pre_activation(const Matrix& h, const Matrix& aggregated, const GraphLayerParams& p) {
  Matrix z(h.rows(), p.w_self.cols());
  z.noalias() = h * p.w_self;
  z.noalias() += aggregated * p.w_neighbor;
  z.rowwise() += p.bias;
  return z;
}

Matrix activate(const Matrix& z, Activation a) {
  return a == Activation::kRelu ? Matrix(z.cwiseMax(0.0)) : z;
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw ValidationError("unknown activation '" + std::string(name) + "'");
}

std::string_view activation_name(Activation a) { return a == Activation::kRelu ? "relu" : "identity"; }

GraphLayerParams GraphLayerParams::identity(std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  return {Matrix::Identity(n, n), Matrix::Zero(n, n), RowVector::Zero(n), Activation::kIdentity};
}

GraphLayerParams GraphLayerParams::random(std::size_t d, Rng& rng, Activation act) {
  const auto n = static_cast<Eigen::Index>(d);
  // Two d-input matrices feed each unit; relu halves the second moment.
  const double bound = std::sqrt((act == Activation::kRelu ? 3.0 : 1.5) / static_cast<double>(d));
  GraphLayerParams p{Matrix(n, n), Matrix(n, n), RowVector::Zero(n), act};
  for (Eigen::Index k = 0; k < p.w_self.size(); ++k) p.w_self.data()[k] = rng.uniform(-bound, bound);
  for (Eigen::Index k = 0; k < p.w_neighbor.size(); ++k) p.w_neighbor.data()[k] = rng.uniform(-bound, bound);
  return p;
}

std::size_t GraphMergeStack::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.w_self.size() + l.w_neighbor.size() + l.bias.size());
  return n;
}

GraphMergeStack GraphMergeStack::identity(std::size_t hops, std::size_t d) {
  return {std::vector<GraphLayerParams>(hops, GraphLayerParams::identity(d))};
}

GraphMergeStack GraphMergeStack::random(std::size_t hops, std::size_t d, std::uint64_t seed, Activation act) {
  Rng rng(seed);
  GraphMergeStack s;
  for (std::size_t t = 0; t < hops; ++t) s.layers.push_back(GraphLayerParams::random(d, rng, act));
  return s;
}

Matrix weighted_sum(const SparseMatrix& graph, const Matrix& table) {
  check_graph(graph, table);
  return graph.multiply(table);
}

Matrix layer_forward(const SparseMatrix& graph, const Matrix& h, const GraphLayerParams& params) {
  check_graph(graph, h);
  check_layer(params, static_cast<std::size_t>(h.cols()));
  return activate(pre_activation(h, graph.multiply(h), params), params.activation);
}

Matrix stack_forward(const SparseMatrix& graph, const Matrix& x, const GraphMergeStack& stack) {
  if (stack.layers.empty()) throw ValidationError("graph merge stack has no layers");
  Matrix h = x;
  for (const auto& layer : stack.layers) h = layer_forward(graph, h, layer);
  return h;
}

StackTrace stack_forward_traced(const SparseMatrix& graph, const Matrix& x, const GraphMergeStack& stack) {
  if (stack.layers.empty()) throw ValidationError("graph merge stack has no layers");
  check_graph(graph, x);
  StackTrace tr;
  Matrix h = x;
  for (const auto& layer : stack.layers) {
    check_layer(layer, static_cast<std::size_t>(h.cols()));
    Matrix agg = graph.multiply(h);
    Matrix z = pre_activation(h, agg, layer);
    Matrix next = activate(z, layer.activation);
    tr.inputs.push_back(std::move(h));
    tr.aggregated.push_back(std::move(agg));
    tr.pre_act.push_back(std::move(z));
    h = std::move(next);
  }
  tr.output = std::move(h);
  return tr;
}

StackGradients stack_backward(const SparseMatrix& graph, const StackTrace& trace, const GraphMergeStack& stack,
                              const Matrix& upstream) {
  if (upstream.rows() != trace.output.rows() || upstream.cols() != trace.output.cols())
    throw ValidationError("upstream gradient shape does not match the stack output");
  if (trace.inputs.size() != stack.layers.size()) throw ValidationError("trace does not belong to this stack");
  StackGradients out;
  out.layers.resize(stack.layers.size());
  Matrix grad = upstream;
  for (std::size_t t = stack.layers.size(); t-- > 0;) {
    const auto& p = stack.layers[t];
    Matrix dz = p.activation == Activation::kRelu
                    ? Matrix((trace.pre_act[t].array() > 0.0).select(grad.array(), 0.0).matrix())
                    : std::move(grad);
    auto& lg = out.layers[t];
    lg.w_self.noalias() = trace.inputs[t].transpose() * dz;
    lg.w_neighbor.noalias() = trace.aggregated[t].transpose() * dz;
    lg.bias = dz.colwise().sum();
    // dH^t = dZ W1^T + G^T (dZ W2^T)
    Matrix through_neighbors(dz.rows(), p.w_neighbor.rows());
    through_neighbors.noalias() = dz * p.w_neighbor.transpose();
    grad = graph.multiply_transposed(through_neighbors);
    grad.noalias() += dz * p.w_self.transpose();
  }
  out.x = std::move(grad);
  return out;
}

StackGradients stack_backward(const SparseMatrix& graph, const Matrix& x, const GraphMergeStack& stack,
                              const Matrix& upstream) {
  return stack_backward(graph, stack_forward_traced(graph, x, stack), stack, upstream);
}

void save_stack(const GraphMergeStack& stack, const std::filesystem::path& path, std::string_view provenance) {
  TensorArchive ar;
  ar.metadata = std::string(provenance);
  for (std::size_t t = 0; t < stack.layers.size(); ++t) {
    const auto& l = stack.layers[t];
    const std::string prefix = "layer" + std::to_string(t) + ".";
    ar.add(prefix + "w_self", l.w_self);
    ar.add(prefix + "w_neighbor", l.w_neighbor);
    ar.add(prefix + "bias", l.bias);
    Matrix act(1, 1);
    act(0, 0) = l.activation == Activation::kRelu ? 1.0 : 0.0;
    ar.add(prefix + "relu", std::move(act));
  }
  ar.save(path);
}

GraphMergeStack load_stack(const std::filesystem::path& path) {
  const auto ar = TensorArchive::load(path);
  GraphMergeStack s;
  for (std::size_t t = 0;; ++t) {
    const std::string prefix = "layer" + std::to_string(t) + ".";
    if (!ar.contains(prefix + "w_self")) break;
    GraphLayerParams l{ar.get(prefix + "w_self"), ar.get(prefix + "w_neighbor"), ar.get(prefix + "bias"),
                       ar.get(prefix + "relu")(0, 0) != 0.0 ? Activation::kRelu : Activation::kIdentity};
    check_layer(l, l.dim());
    s.layers.push_back(std::move(l));
  }
  if (s.layers.empty()) throw ValidationError("no graph layers in " + path.string());
  return s;
}

}  // namespace graphmerge::gnn
