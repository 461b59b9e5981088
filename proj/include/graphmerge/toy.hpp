#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graphmerge/aligner.hpp"
#include "graphmerge/analysis.hpp"
#include "graphmerge/corpus.hpp"
#include "graphmerge/graph.hpp"
#include "graphmerge/nmt/config.hpp"

namespace graphmerge::toy {

/// Synthetic three-language setup: English plus two languages ("l1",
/// "l2") with their own surface forms and a 1:1 lexicon onto English
/// concepts. Both foreign languages reverse English word order. Only
/// en-l1 and en-l2 bitexts exist; en-l2 is the small one.
struct ToyConfig {
  std::size_t concepts = 300;
  std::size_t high_pairs = 3000;  ///< en-l1 training pairs
  std::size_t low_pairs = 300;    ///< en-l2 training pairs
  std::size_t dev_pairs = 200;    ///< per bitext
  std::size_t min_len = 3;
  std::size_t max_len = 7;
  double zipf = 0.0;  ///< concept frequency exponent; 0 draws concepts uniformly
  std::uint64_t seed = 1;
};

std::string word(std::string_view lang, std::size_t concept_id);

struct ToyData {
  CorpusCollection train;
  CorpusCollection dev;
  BilingualDictionary en_l1;  ///< complete lexicon
  BilingualDictionary en_l2;
  /// True word alignments of every training corpus, in corpus order.
  std::vector<std::vector<SentenceAlignment>> gold;
};

ToyData make_toy(const ToyConfig& config);

/// Data plus the vocabulary and the alignment-derived equivalence graph.
struct PreparedToy {
  ToyData data;
  Vocabulary vocab;
  EquivalenceGraph graph;
};

PreparedToy prepare_toy(const ToyConfig& config, int align_iterations = 5,
                        SymmetrizeStrategy strategy = SymmetrizeStrategy::kIntersect);

struct RunResult {
  std::size_t hops = 0;
  nmt::TieMode tie = nmt::TieMode::kReparam;
  std::uint64_t seed = 0;
  double low_accuracy = 0.0;   ///< dev token accuracy, en-l2 and l2-en pooled
  double high_accuracy = 0.0;  ///< dev token accuracy, en-l1 and l1-en pooled
  double sim_original = 0.0;   ///< en-l2 lexicon similarity, original table
  double sim_reparam = 0.0;    ///< same on the graph-merged table (hops > 0)
  double zs_original = 0.0;    ///< induced l1-l2 similarity, original table
  double zs_reparam = 0.0;
  std::size_t steps = 0;
  double seconds = 0.0;
};

/// Trains one model on the prepared toy and measures it.
RunResult run_toy(const PreparedToy& toy, nmt::ModelConfig model, std::uint64_t seed);

}  // namespace graphmerge::toy
