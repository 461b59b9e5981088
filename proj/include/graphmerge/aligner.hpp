#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "graphmerge/corpus.hpp"

namespace graphmerge {

/// Target-side NULL word of IBM Model 1.
inline constexpr Index kNullToken = std::numeric_limits<Index>::max();

/// IBM Model 1 translation table t(src | tgt). For every target token
/// (including kNullToken) the probabilities over source tokens sum to 1.
class LexicalTable {
 public:
  double prob(Index src, Index tgt) const;
  void set(Index src, Index tgt, double p) { table_[key(src, tgt)] = p; }
  std::size_t size() const { return table_.size(); }

  /// Sum of t(. | tgt) over all stored source tokens.
  double mass(Index tgt) const;

  template <typename F>
  void for_each(F&& f) const {
    for (const auto& [k, p] : table_) f(static_cast<Index>(k >> 32), static_cast<Index>(k & 0xffffffffu), p);
  }

 private:
  static std::uint64_t key(Index src, Index tgt) { return (std::uint64_t{src} << 32) | tgt; }
  std::unordered_map<std::uint64_t, double> table_;
};

/// (i, j): position i in the source sentence, j in the target sentence.
using AlignmentLink = std::pair<std::uint32_t, std::uint32_t>;
using SentenceAlignment = std::set<AlignmentLink>;

/// EM training from uniform initialization. Deterministic.
LexicalTable train_ibm1(const BitextCorpus& corpus, const Vocabulary& vocab, int iterations);

/// Corpus log-likelihood log P(src | tgt) under Model 1 (NULL included in
/// the target, uniform alignment prior).
double ibm1_log_likelihood(const LexicalTable& table, const BitextCorpus& corpus, const Vocabulary& vocab);

/// Each source position links to its most probable target position.
/// Ties go to the smallest j; NULL wins only when strictly more probable,
/// and NULL links are dropped.
SentenceAlignment viterbi_align(const LexicalTable& table, const Vocabulary& vocab, const Sentence& src,
                                const Sentence& tgt);

enum class SymmetrizeStrategy { kIntersect, kUnion, kGrowDiagFinalAnd };

SymmetrizeStrategy parse_strategy(std::string_view name);
std::string_view strategy_name(SymmetrizeStrategy s);

/// `bwd` must already be transposed into (source, target) order.
SentenceAlignment symmetrize(const SentenceAlignment& fwd, const SentenceAlignment& bwd, SymmetrizeStrategy strategy);

SentenceAlignment transpose(const SentenceAlignment& a);

/// "i-j i-j ..." (Pharaoh format). Duplicate links collapse.
SentenceAlignment parse_pharaoh(std::string_view line);
/// Links in lexicographic order, space separated.
std::string emit_pharaoh(const SentenceAlignment& a);

/// One alignment per non-comment line; lines starting with '#' are headers.
std::vector<SentenceAlignment> read_pharaoh_file(const std::filesystem::path& path);
void write_pharaoh_file(const std::filesystem::path& path, const std::vector<SentenceAlignment>& alignments,
                        const std::vector<std::string>& header_lines);

/// Throws if a link falls outside its sentence.
void check_alignment_bounds(const SentenceAlignment& a, std::size_t src_len, std::size_t tgt_len);

struct DirectionalAlignments {
  std::vector<SentenceAlignment> forward;
  std::vector<SentenceAlignment> backward;  ///< transposed into source-major order
};

/// Trains Model 1 in both directions and Viterbi-aligns every pair.
DirectionalAlignments align_corpus(const BitextCorpus& corpus, const Vocabulary& vocab, int iterations);

}  // namespace graphmerge
