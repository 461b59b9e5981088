#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "graphmerge/common.hpp"
#include "graphmerge/rng.hpp"
#include "graphmerge/sparse.hpp"

namespace graphmerge::gnn {

enum class Activation { kRelu, kIdentity };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation a);

/// One GraphSage-style merge layer: H' = act(H W1 + G H W2 + 1 b).
struct GraphLayerParams {
  Matrix w_self;       ///< W1, d x d, applied to the token's own row
  Matrix w_neighbor;   ///< W2, d x d, applied to the aggregated neighbours
  RowVector bias;      ///< b, length d
  Activation activation = Activation::kRelu;

  std::size_t dim() const { return static_cast<std::size_t>(w_self.rows()); }

  /// W1 = I, W2 = 0, b = 0, identity activation: the layer is a no-op.
  static GraphLayerParams identity(std::size_t d);
  /// W1, W2 ~ U(-a, a) with a = sqrt(3/d) for relu and sqrt(1.5/d) for
  /// identity, so the layer keeps the second moment of its input; b = 0.
  static GraphLayerParams random(std::size_t d, Rng& rng, Activation act = Activation::kRelu);
};

/// Stacked layers; layer t maps H^t to H^{t+1}, with H^0 = X.
struct GraphMergeStack {
  std::vector<GraphLayerParams> layers;

  std::size_t hops() const { return layers.size(); }
  std::size_t dim() const { return layers.empty() ? 0 : layers.front().dim(); }
  /// hops * (2 d^2 + d)
  std::size_t parameter_count() const;

  static GraphMergeStack identity(std::size_t hops, std::size_t d);
  static GraphMergeStack random(std::size_t hops, std::size_t d, std::uint64_t seed,
                                Activation act = Activation::kRelu);
};

/// X' = G X. No parameters.
Matrix weighted_sum(const SparseMatrix& graph, const Matrix& table);

Matrix layer_forward(const SparseMatrix& graph, const Matrix& h, const GraphLayerParams& params);

Matrix stack_forward(const SparseMatrix& graph, const Matrix& x, const GraphMergeStack& stack);

/// Intermediate values kept by the forward pass for the backward pass.
struct StackTrace {
  std::vector<Matrix> inputs;      ///< H^t per layer
  std::vector<Matrix> aggregated;  ///< G H^t per layer
  std::vector<Matrix> pre_act;     ///< H^t W1 + G H^t W2 + B per layer
  Matrix output;
};

StackTrace stack_forward_traced(const SparseMatrix& graph, const Matrix& x, const GraphMergeStack& stack);

struct LayerGradients {
  Matrix w_self;
  Matrix w_neighbor;
  RowVector bias;
};

struct StackGradients {
  Matrix x;
  std::vector<LayerGradients> layers;
};

/// Exact gradients of a scalar loss L given dL/dH (H = stack output).
StackGradients stack_backward(const SparseMatrix& graph, const StackTrace& trace, const GraphMergeStack& stack,
                              const Matrix& upstream);
StackGradients stack_backward(const SparseMatrix& graph, const Matrix& x, const GraphMergeStack& stack,
                              const Matrix& upstream);

/// Named tensors "layer<t>.w_self" / ".w_neighbor" / ".bias".
void save_stack(const GraphMergeStack& stack, const std::filesystem::path& path, std::string_view provenance = {});
GraphMergeStack load_stack(const std::filesystem::path& path);

}  // namespace graphmerge::gnn
