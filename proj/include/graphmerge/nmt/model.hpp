#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "graphmerge/corpus.hpp"
#include "graphmerge/gnn.hpp"
#include "graphmerge/graph.hpp"
#include "graphmerge/nmt/autograd.hpp"
#include "graphmerge/nmt/config.hpp"
#include "graphmerge/tensor_io.hpp"

namespace graphmerge::nmt {

/// One encoded training direction instance.
///   src     = <2TGT> x_1 .. x_n </s>
///   dec_in  = <s> y_1 .. y_m
///   dec_out = y_1 .. y_m </s>
struct Example {
  std::vector<Index> src;
  std::vector<Index> dec_in;
  std::vector<Index> dec_out;
};

/// Builds an example, truncating both sides to `max_len` positions.
Example make_example(const Vocabulary& vocab, const Sentence& src, const Sentence& tgt, std::string_view tgt_lang,
                     std::size_t max_len);
std::vector<Index> make_source(const Vocabulary& vocab, const Sentence& src, std::string_view tgt_lang,
                               std::size_t max_len);

struct BatchStats {
  double loss = 0.0;      ///< mean label-smoothed loss per target token
  double nll_sum = 0.0;
  std::size_t tokens = 0;  ///< target tokens (</s> included)
  std::size_t correct = 0;
  std::size_t src_tokens = 0;

  double nll() const { return tokens ? nll_sum / static_cast<double>(tokens) : 0.0; }
  double accuracy() const { return tokens ? static_cast<double>(correct) / static_cast<double>(tokens) : 0.0; }
  BatchStats& operator+=(const BatchStats& o);
};

/// Wall time spent in the graph merge path of one training step.
struct GraphTiming {
  double forward_seconds = 0.0;
  double backward_seconds = 0.0;
  double total() const { return forward_seconds + backward_seconds; }
};

struct ParameterShape {
  std::string name;
  std::size_t rows;
  std::size_t cols;
};

/// Every parameter the model allocates for `config` and a vocabulary of
/// `vocab_size`, in a fixed order. Graph layers are named "graph.*".
std::vector<ParameterShape> parameter_shapes(const ModelConfig& config, std::size_t vocab_size);

struct ParameterCount {
  std::size_t total = 0;  ///< trainable
  std::size_t graph = 0;  ///< trainable, inside the graph stack
  double graph_fraction() const { return total ? static_cast<double>(graph) / static_cast<double>(total) : 0.0; }
};
ParameterCount count_parameters(const ModelConfig& config, std::size_t vocab_size);

/// Pre-norm transformer encoder-decoder over one shared embedding table.
/// With hops > 0 every lookup reads the graph-merged table
/// H = stack_forward(G, X); the output projection reads H, X or a free
/// matrix depending on the tie mode.
class TranslationModel {
 public:
  TranslationModel(ModelConfig config, Vocabulary vocab, std::optional<EquivalenceGraph> graph, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const EquivalenceGraph* graph() const { return graph_ ? &*graph_ : nullptr; }

  /// All parameters in allocation order, frozen ones included.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter& parameter(std::string_view name);
  const Parameter& parameter(std::string_view name) const;
  bool has_parameter(std::string_view name) const;
  ParameterCount parameter_count() const;

  /// Rebinds the output projection. Switching to kNone allocates a fresh
  /// output matrix; switching away from it drops that matrix.
  void set_tie_mode(TieMode mode);

  gnn::GraphMergeStack graph_stack() const;
  void set_graph_stack(const gnn::GraphMergeStack& stack);

  const Matrix& original_table() const;
  /// stack_forward(G, X); throws for a baseline model.
  Matrix reparam_table() const;
  /// The table every lookup reads: reparam_table() or X.
  Matrix input_table() const;

  /// Teacher-forced loss. When `dropout_rng` is null the pass runs without
  /// dropout; when `accumulate_grad` is set, gradients are added to the
  /// parameters' grad buffers.
  /// `timing`, if given, receives the graph-path wall time (hops > 0).
  BatchStats forward_loss(std::span<const Example> batch, Rng* dropout_rng, bool accumulate_grad,
                          GraphTiming* timing = nullptr);

  /// Loss statistics over `examples` without dropout, in chunks.
  BatchStats evaluate(std::span<const Example> examples, std::size_t batch_size) const;

  /// Argmax decoding until </s> or `max_len` tokens. Inputs are encoded
  /// sources (make_source); outputs exclude </s>.
  std::vector<std::vector<Index>> greedy_decode(std::span<const std::vector<Index>> sources, std::size_t max_len,
                                                std::size_t batch_size = 64) const;
  Sentence translate(const Sentence& src, std::string_view tgt_lang, std::size_t max_len) const;

  TensorArchive to_archive(std::string_view provenance = {}) const;
  /// Copies values from an archive written for the same configuration.
  void load_archive(const TensorArchive& archive);

  /// Writes config.ini, vocab.txt, graph.bin (if any) and model.bin.
  void save(const std::filesystem::path& dir, std::string_view provenance = {}) const;
  static TranslationModel load(const std::filesystem::path& dir);

 private:
  struct Pass;

  void allocate(std::uint64_t seed);
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  ModelConfig config_;
  Vocabulary vocab_;
  std::optional<EquivalenceGraph> graph_;
  std::vector<std::unique_ptr<Parameter>> params_;
  Matrix positions_;
  std::uint64_t seed_ = 0;
};

}  // namespace graphmerge::nmt
