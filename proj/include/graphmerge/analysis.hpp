#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graphmerge/corpus.hpp"
#include "graphmerge/nmt/model.hpp"

namespace graphmerge {

/// Word pairs (a, b) between two languages, sorted and unique.
struct BilingualDictionary {
  std::string lang_a;
  std::string lang_b;
  std::vector<std::pair<std::string, std::string>> pairs;

  void add(std::string a, std::string b);
  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }

  /// "word_a<TAB>word_b" per line; blank lines and '#' lines are skipped.
  static BilingualDictionary load(const std::filesystem::path& path, std::string lang_a, std::string lang_b);
  void save(const std::filesystem::path& path) const;
};

/// Pairs whose two words are both in the vocabulary (exact match).
std::vector<std::pair<Index, Index>> surviving_pairs(const BilingualDictionary& dict, const Vocabulary& vocab);

/// Raw cosine; throws ValidationError if either row has zero norm.
double cosine(const Matrix& table, Index a, Index b);

/// Mean cosine over the surviving pairs.
double pair_similarity(const Matrix& table, const Vocabulary& vocab, const BilingualDictionary& dict);

/// For every surviving a-side word, the mean cosine to `n_samples` rows
/// drawn uniformly from the vocabulary; averaged over words.
double isotropy(const Matrix& table, const Vocabulary& vocab, const BilingualDictionary& dict, std::size_t n_samples,
                std::uint64_t seed, bool include_reserved = true);

/// Joins two dictionaries on their shared a-side (English) words.
BilingualDictionary induce_zero_shot_dict(const BilingualDictionary& en_a, const BilingualDictionary& en_b);

/// Corpus BLEU: 4-gram, uniform weights, brevity penalty, no smoothing.
/// Returns a value in [0, 100].
double bleu(std::span<const Sentence> hypotheses, std::span<const Sentence> references);

enum class TableMode { kOriginal, kReparam };
TableMode parse_table_mode(std::string_view name);
std::string_view table_mode_name(TableMode mode);

struct SimilarityReport {
  std::string pair;  ///< "a-b"
  TableMode mode = TableMode::kOriginal;
  double mean_similarity = 0.0;
  double isotropy = 0.0;
  std::size_t n_pairs = 0;
  std::uint64_t seed = 0;
};

/// pair_similarity and isotropy per dictionary on the original table or
/// the graph-merged one. Each dictionary gets its own derived seed.
std::vector<SimilarityReport> similarity_suite(const nmt::TranslationModel& model,
                                               std::span<const BilingualDictionary> dicts, TableMode mode,
                                               std::uint64_t seed, std::size_t n_samples = 50,
                                               bool include_reserved = true);
std::vector<SimilarityReport> similarity_suite(const Matrix& table, const Vocabulary& vocab,
                                               std::span<const BilingualDictionary> dicts, TableMode mode,
                                               std::uint64_t seed, std::size_t n_samples = 50,
                                               bool include_reserved = true);

/// Columns: pair, mode, mean_similarity, isotropy, n_pairs, seed.
std::string similarity_csv(std::span<const SimilarityReport> reports, std::string_view provenance = {});

}  // namespace graphmerge
