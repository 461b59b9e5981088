#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "graphmerge/aligner.hpp"
#include "graphmerge/corpus.hpp"
#include "graphmerge/sparse.hpp"

namespace graphmerge {

/// e^st_ij: how often source token i was aligned to target token j in one
/// bitext, keyed by vocabulary index.
struct CountMatrix {
  std::string src_lang;
  std::string tgt_lang;
  std::size_t dim = 0;  ///< |V|
  std::map<std::pair<Index, Index>, std::uint64_t> counts;

  /// Counts of the reverse direction (D_ts), same links.
  CountMatrix transposed() const;
};

/// Counts every link once. Self-links (a token shared by both sides
/// aligned to itself) and links touching special or tag tokens carry no
/// transfer and are skipped.
CountMatrix accumulate_counts(const BitextCorpus& corpus, std::span<const SentenceAlignment> alignments,
                              const Vocabulary& vocab);

/// Bilingual transfer ratios G^st. Rows without counts stay empty.
struct GraphFragment {
  std::string src_lang;
  std::string tgt_lang;
  SparseMatrix alpha;
};

GraphFragment normalize_bilingual(const CountMatrix& counts);

/// Row-stochastic multilingual equivalence graph. Each row either sums to
/// one over off-diagonal neighbours or is the pure self-loop {i: 1.0}.
class EquivalenceGraph {
 public:
  EquivalenceGraph() = default;
  /// Checks the row invariants (and reserved-row self-loops when a
  /// vocabulary is given); throws ValidationError on violation.
  explicit EquivalenceGraph(SparseMatrix matrix, const Vocabulary* vocab = nullptr);

  const SparseMatrix& matrix() const { return matrix_; }
  std::size_t size() const { return matrix_.rows(); }
  std::size_t nnz() const { return matrix_.nnz(); }
  bool is_self_loop_row(Index i) const;
  /// Number of off-diagonal entries.
  std::size_t edge_count() const;

  bool operator==(const EquivalenceGraph& other) const = default;

 private:
  SparseMatrix matrix_;
};

/// Element-wise sum of the fragments, row renormalization, and self-loops
/// for rows without mass. Reserved tokens always get self-loops. The
/// result does not depend on fragment order.
EquivalenceGraph merge_graphs(std::span<const GraphFragment> fragments, const Vocabulary& vocab);

/// Tokens reachable from `i` along at most `hops` off-diagonal edges
/// (row i lists the tokens that send information to i). `i` itself is not
/// reported.
std::set<Index> khop_neighbors(const EquivalenceGraph& graph, Index i, int hops);

void save_graph(const EquivalenceGraph& graph, const std::filesystem::path& path, std::string_view provenance = {});
EquivalenceGraph load_graph(const std::filesystem::path& path, std::string* provenance = nullptr);
std::string serialize_graph(const EquivalenceGraph& graph, std::string_view provenance = {});
EquivalenceGraph deserialize_graph(std::string_view bytes, std::string* provenance = nullptr);

/// "i<TAB>j<TAB>alpha" per stored entry, preceded by '#' header lines.
void export_graph_tsv(const EquivalenceGraph& graph, const std::filesystem::path& path,
                      std::string_view provenance = {});

/// For every vocabulary index, the set of languages whose text contains
/// the token (bit k = collection.languages()[k]).
std::vector<std::uint64_t> token_language_masks(const CorpusCollection& collection, const Vocabulary& vocab);

struct GraphAudit {
  std::size_t rows = 0;
  std::size_t edges = 0;
  std::size_t self_loop_rows = 0;
  double max_row_error = 0.0;  ///< max |row sum - 1|
  double min_value = 0.0;
  double max_value = 0.0;
  /// Off-diagonal mass between tokens that never occur in the pivot language.
  double non_pivot_mass = 0.0;
  bool ok() const { return max_row_error <= 1e-9 && min_value >= 0.0 && max_value <= 1.0; }
};

GraphAudit audit_graph(const EquivalenceGraph& graph, const CorpusCollection& collection, const Vocabulary& vocab,
                       std::string_view pivot = "en");

/// Full alignment-to-graph route: count, normalize both directions of
/// every corpus, merge.
EquivalenceGraph build_equivalence_graph(const CorpusCollection& collection,
                                         std::span<const std::vector<SentenceAlignment>> alignments,
                                         const Vocabulary& vocab);

}  // namespace graphmerge
