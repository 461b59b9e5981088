#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "graphmerge/common.hpp"

namespace graphmerge {

/// A pre-tokenized subword sequence.
using Sentence = std::vector<std::string>;

struct SentencePair {
  Sentence src;
  Sentence tgt;
};

/// Per-file bookkeeping from load_bitext.
struct LoadStats {
  std::size_t blank_lines = 0;     ///< skipped silently
  std::size_t rejected_lines = 0;  ///< wrong field count, empty side, reserved token
};

struct BitextCorpus {
  std::string src_lang;
  std::string tgt_lang;
  std::vector<SentencePair> pairs;
  LoadStats stats;

  /// Same pairs with the sides swapped (D_ts from D_st).
  BitextCorpus reversed() const;
  std::size_t size() const { return pairs.size(); }
};

/// Splits on spaces; empty fields from repeated spaces are dropped.
Sentence split_tokens(std::string_view line);
std::string join_tokens(const Sentence& sentence);

/// True for "<pad>"-style special tokens and "<2X>" language tags.
bool is_reserved_token(std::string_view token);

/// Reads a tab-separated bitext. Malformed lines are counted in
/// `stats.rejected_lines` rather than thrown; a missing file throws.
BitextCorpus load_bitext(const std::filesystem::path& path, std::string src_lang, std::string tgt_lang);
void save_bitext(const BitextCorpus& corpus, const std::filesystem::path& path);

/// A set of bitexts over a common language inventory.
class CorpusCollection {
 public:
  /// Rejects empty corpora, src == tgt, and duplicate ordered pairs.
  void add(BitextCorpus corpus);

  const std::vector<BitextCorpus>& corpora() const { return corpora_; }
  /// Languages in first-occurrence order (src before tgt, corpus order).
  const std::vector<std::string>& languages() const { return languages_; }
  bool empty() const { return corpora_.empty(); }
  std::size_t size() const { return corpora_.size(); }
  const BitextCorpus& operator[](std::size_t i) const { return corpora_[i]; }

  std::optional<std::size_t> find(std::string_view src, std::string_view tgt) const;

  /// Every corpus plus its reverse direction, skipping reverses that are
  /// already present. This is the set of translation directions a
  /// multilingual model trains on.
  CorpusCollection with_reverse_directions() const;

  std::vector<std::size_t> sizes() const;

 private:
  std::vector<BitextCorpus> corpora_;
  std::vector<std::string> languages_;
};

/// Shared subword vocabulary. Layout: specials, then one "<2X>" tag per
/// language, then corpus tokens in first-occurrence order.
class Vocabulary {
 public:
  static constexpr Index kPad = 0;
  static constexpr Index kBos = 1;
  static constexpr Index kEos = 2;
  static constexpr Index kUnk = 3;
  static constexpr std::size_t kNumSpecials = 4;

  static Vocabulary build(const CorpusCollection& collection);
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Builds from an explicit token list (specials and tags included).
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(Index i) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::optional<Index> find(std::string_view token) const;
  /// Maps unknown tokens to kUnk.
  Index lookup(std::string_view token) const;
  std::vector<Index> encode(const Sentence& sentence) const;
  Sentence decode(std::span<const Index> ids) const;

  /// Index of the "<2X>" tag for `lang`; throws if the language is unknown.
  Index tag(std::string_view lang) const;
  const std::vector<std::pair<std::string, Index>>& tags() const { return tags_; }

  /// Specials and language tags.
  bool is_reserved(Index i) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, Index> index_;
  std::vector<std::pair<std::string, Index>> tags_;
  std::size_t reserved_end_ = kNumSpecials;
};

std::string language_tag(std::string_view lang);

/// p_i = (n_i / N)^(1/T), renormalized.
std::vector<double> temperature_weights(std::span<const std::size_t> sizes, double temperature);

struct SampleIndex {
  std::size_t corpus;
  std::size_t pair;
  bool operator==(const SampleIndex&) const = default;
};

/// Draws `batch_size` (corpus, pair) indices: corpus by `weights`, pair
/// uniformly inside the corpus. Reproducible for a fixed seed.
std::vector<SampleIndex> sample_batch(const CorpusCollection& collection, std::span<const double> weights,
                                      std::size_t batch_size, std::uint64_t seed);

}  // namespace graphmerge
