#include "graphmerge/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "graphmerge/binary_io.hpp"
#include "graphmerge/rng.hpp"

namespace graphmerge {
namespace {

constexpr const char* kSpecialTokens[Vocabulary::kNumSpecials] = {"<pad>", "<s>", "</s>", "<unk>"};
constexpr std::string_view kVocabHeader = "#graphmerge-vocab";

bool is_language_tag(std::string_view token) {
  return token.size() > 3 && token.starts_with("<2") && token.ends_with(">");
}

}  // namespace

BitextCorpus BitextCorpus::reversed() const {
  BitextCorpus out;
  out.src_lang = tgt_lang;
  out.tgt_lang = src_lang;
  out.stats = stats;
  out.pairs.reserve(pairs.size());
  for (const auto& p : pairs) out.pairs.push_back({p.tgt, p.src});
  return out;
}

Sentence split_tokens(std::string_view line) {
  Sentence out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    std::size_t end = line.find(' ', pos);
    if (end == std::string_view::npos) end = line.size();
    if (end > pos) out.emplace_back(line.substr(pos, end - pos));
    pos = end + 1;
  }
  return out;
}

std::string join_tokens(const Sentence& sentence) {
  std::string out;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    if (i) out += ' ';
    out += sentence[i];
  }
  return out;
}

bool is_reserved_token(std::string_view token) {
  for (const char* s : kSpecialTokens)
    if (token == s) return true;
  return is_language_tag(token);
}

BitextCorpus load_bitext(const std::filesystem::path& path, std::string src_lang, std::string tgt_lang) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open bitext: " + path.string());
  BitextCorpus corpus;
  corpus.src_lang = std::move(src_lang);
  corpus.tgt_lang = std::move(tgt_lang);

  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      ++corpus.stats.blank_lines;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      ++corpus.stats.rejected_lines;
      continue;
    }
    SentencePair pair{split_tokens(std::string_view(line).substr(0, tab)),
                      split_tokens(std::string_view(line).substr(tab + 1))};
    const auto reserved = [](const Sentence& s) { return std::ranges::any_of(s, is_reserved_token); };
    if (pair.src.empty() || pair.tgt.empty() || reserved(pair.src) || reserved(pair.tgt)) {
      ++corpus.stats.rejected_lines;
      continue;
    }
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

void save_bitext(const BitextCorpus& corpus, const std::filesystem::path& path) {
  std::string out;
  for (const auto& p : corpus.pairs) out += join_tokens(p.src) + '\t' + join_tokens(p.tgt) + '\n';
  write_file_atomic(path, out);
}

void CorpusCollection::add(BitextCorpus corpus) {
  if (corpus.src_lang.empty() || corpus.tgt_lang.empty())
    throw ValidationError("corpus language code is empty");
  if (corpus.src_lang == corpus.tgt_lang)
    throw ValidationError("corpus source and target language are both '" + corpus.src_lang + "'");
  if (corpus.pairs.empty())
    throw ValidationError("corpus " + corpus.src_lang + "-" + corpus.tgt_lang + " has no sentence pairs");
  for (const auto& p : corpus.pairs)
    if (p.src.empty() || p.tgt.empty()) throw ValidationError("corpus contains an empty sentence");
  if (find(corpus.src_lang, corpus.tgt_lang))
    throw ValidationError("duplicate corpus for direction " + corpus.src_lang + "-" + corpus.tgt_lang);
  for (const auto* lang : {&corpus.src_lang, &corpus.tgt_lang})
    if (std::ranges::find(languages_, *lang) == languages_.end()) languages_.push_back(*lang);
  corpora_.push_back(std::move(corpus));
}

std::optional<std::size_t> CorpusCollection::find(std::string_view src, std::string_view tgt) const {
  for (std::size_t i = 0; i < corpora_.size(); ++i)
    if (corpora_[i].src_lang == src && corpora_[i].tgt_lang == tgt) return i;
  return std::nullopt;
}

CorpusCollection CorpusCollection::with_reverse_directions() const {
  CorpusCollection out;
  for (const auto& c : corpora_) {
    if (!out.find(c.src_lang, c.tgt_lang)) out.add(c);
    if (!find(c.tgt_lang, c.src_lang) && !out.find(c.tgt_lang, c.src_lang)) out.add(c.reversed());
  }
  return out;
}

std::vector<std::size_t> CorpusCollection::sizes() const {
  std::vector<std::size_t> out;
  for (const auto& c : corpora_) out.push_back(c.size());
  return out;
}

std::string language_tag(std::string_view lang) {
  std::string out = "<2";
  for (char c : lang) out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  out += '>';
  return out;
}

Vocabulary Vocabulary::build(const CorpusCollection& collection) {
  if (collection.empty()) throw ValidationError("cannot build a vocabulary from an empty collection");
  Vocabulary v;
  for (const char* s : kSpecialTokens) {
    v.index_.emplace(s, static_cast<Index>(v.tokens_.size()));
    v.tokens_.emplace_back(s);
  }
  for (const auto& lang : collection.languages()) {
    std::string tag = language_tag(lang);
    if (v.index_.contains(tag)) throw ValidationError("language codes collide on tag " + tag);
    const auto id = static_cast<Index>(v.tokens_.size());
    v.index_.emplace(tag, id);
    v.tokens_.push_back(tag);
    v.tags_.emplace_back(lang, id);
  }
  v.reserved_end_ = v.tokens_.size();
  const auto add = [&v](const Sentence& s) {
    for (const auto& tok : s) {
      if (v.index_.contains(tok)) continue;
      v.index_.emplace(tok, static_cast<Index>(v.tokens_.size()));
      v.tokens_.push_back(tok);
    }
  };
  for (const auto& corpus : collection.corpora())
    for (const auto& pair : corpus.pairs) {
      add(pair.src);
      add(pair.tgt);
    }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kNumSpecials) throw ValidationError("vocabulary is missing special tokens");
  for (std::size_t i = 0; i < kNumSpecials; ++i)
    if (tokens[i] != kSpecialTokens[i]) throw ValidationError("vocabulary special token mismatch at index " + std::to_string(i));
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<Index>(i)).second)
      throw ValidationError("duplicate vocabulary token '" + v.tokens_[i] + "'");
  }
  std::size_t i = kNumSpecials;
  for (; i < v.tokens_.size() && is_language_tag(v.tokens_[i]); ++i) {
    const auto& tag = v.tokens_[i];
    std::string lang;
    for (char c : tag.substr(2, tag.size() - 3)) lang += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    v.tags_.emplace_back(lang, static_cast<Index>(i));
  }
  v.reserved_end_ = i;
  for (; i < v.tokens_.size(); ++i)
    if (is_reserved_token(v.tokens_[i])) throw ValidationError("reserved token '" + v.tokens_[i] + "' outside the tag block");
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ostringstream out;
  out << kVocabHeader << " size=" << tokens_.size() << " pad=" << kPad << " bos=" << kBos << " eos=" << kEos
      << " unk=" << kUnk << " tags=";
  for (std::size_t i = 0; i < tags_.size(); ++i) out << (i ? "," : "") << tags_[i].first << ':' << tags_[i].second;
  out << '\n';
  for (const auto& t : tokens_) out << t << '\n';
  write_file_atomic(path, out.str());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open vocabulary: " + path.string());
  std::string header;
  std::getline(in, header);
  if (!header.starts_with(kVocabHeader)) throw ValidationError("not a vocabulary file: " + path.string());
  std::size_t size = 0;
  std::string tags_field;
  {
    std::istringstream fields(header.substr(kVocabHeader.size()));
    std::string kv;
    while (fields >> kv) {
      if (kv.starts_with("size=")) size = std::stoull(kv.substr(5));
      if (kv.starts_with("tags=")) tags_field = kv.substr(5);
    }
  }
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  if (tokens.size() != size)
    throw ValidationError("vocabulary declares " + std::to_string(size) + " tokens but has " + std::to_string(tokens.size()));
  Vocabulary v = from_tokens(std::move(tokens));
  // The header is authoritative for language codes (tags are upper-cased).
  if (!tags_field.empty()) {
    v.tags_.clear();
    std::istringstream items(tags_field);
    std::string item;
    while (std::getline(items, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw ValidationError("malformed vocabulary tag entry '" + item + "'");
      v.tags_.emplace_back(item.substr(0, colon), static_cast<Index>(std::stoul(item.substr(colon + 1))));
    }
  }
  return v;
}

const std::string& Vocabulary::token(Index i) const {
  if (i >= tokens_.size()) throw ValidationError("vocabulary index out of range: " + std::to_string(i));
  return tokens_[i];
}

std::optional<Index> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Index Vocabulary::lookup(std::string_view token) const { return find(token).value_or(kUnk); }

std::vector<Index> Vocabulary::encode(const Sentence& sentence) const {
  std::vector<Index> out;
  out.reserve(sentence.size());
  for (const auto& t : sentence) out.push_back(lookup(t));
  return out;
}

Sentence Vocabulary::decode(std::span<const Index> ids) const {
  Sentence out;
  out.reserve(ids.size());
  for (Index i : ids) out.push_back(token(i));
  return out;
}

Index Vocabulary::tag(std::string_view lang) const {
  for (const auto& [code, id] : tags_)
    if (code == lang) return id;
  throw ValidationError("no language tag for '" + std::string(lang) + "'");
}

bool Vocabulary::is_reserved(Index i) const { return i < reserved_end_; }

std::vector<double> temperature_weights(std::span<const std::size_t> sizes, double temperature) {
  if (sizes.empty()) throw ValidationError("temperature_weights: no corpora");
  if (!(temperature > 0.0)) throw ValidationError("temperature_weights: temperature must be positive");
  double total = 0.0;
  for (auto n : sizes) {
    if (n == 0) throw ValidationError("temperature_weights: corpus sizes must be positive");
    total += static_cast<double>(n);
  }
  std::vector<double> out;
  out.reserve(sizes.size());
  for (auto n : sizes) out.push_back(std::pow(static_cast<double>(n) / total, 1.0 / temperature));
  const double z = std::accumulate(out.begin(), out.end(), 0.0);
  for (auto& p : out) p /= z;
  return out;
}

std::vector<SampleIndex> sample_batch(const CorpusCollection& collection, std::span<const double> weights,
                                      std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw ValidationError("sample_batch: batch_size must be positive");
  if (weights.size() != collection.size()) throw ValidationError("sample_batch: one weight per corpus required");
  std::vector<double> cumulative(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0.0) throw ValidationError("sample_batch: negative weight");
    acc += weights[i];
    cumulative[i] = acc;
  }
  if (!(acc > 0.0)) throw ValidationError("sample_batch: weights sum to zero");

  Rng rng(seed);
  std::vector<SampleIndex> out;
  out.reserve(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    std::size_t c = std::min<std::size_t>(it - cumulative.begin(), weights.size() - 1);
    while (weights[c] == 0.0) --c;  // u landed on a zero-width bucket boundary
    out.push_back({c, rng.below(collection[c].size())});
  }
  return out;
}

}  // namespace graphmerge
