#include "graphmerge/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "graphmerge/binary_io.hpp"
#include "graphmerge/rng.hpp"

namespace graphmerge {

void BilingualDictionary::add(std::string a, std::string b) {
  std::pair<std::string, std::string> p{std::move(a), std::move(b)};
  auto it = std::lower_bound(pairs.begin(), pairs.end(), p);
  if (it == pairs.end() || *it != p) pairs.insert(it, std::move(p));
}

BilingualDictionary BilingualDictionary::load(const std::filesystem::path& path, std::string lang_a, std::string lang_b) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dictionary " + path.string());
  BilingualDictionary d{std::move(lang_a), std::move(lang_b), {}};
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::pair<std::string, std::string>> raw;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() || line.find('\t', tab + 1) != std::string::npos)
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected word_a<TAB>word_b");
    raw.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  std::sort(raw.begin(), raw.end());
  raw.erase(std::unique(raw.begin(), raw.end()), raw.end());
  d.pairs = std::move(raw);
  return d;
}

void BilingualDictionary::save(const std::filesystem::path& path) const {
  std::string out;
  for (const auto& [a, b] : pairs) out += a + "\t" + b + "\n";
  write_file_atomic(path, out);
}

std::vector<std::pair<Index, Index>> surviving_pairs(const BilingualDictionary& dict, const Vocabulary& vocab) {
  std::vector<std::pair<Index, Index>> out;
  for (const auto& [a, b] : dict.pairs) {
    const auto ia = vocab.find(a), ib = vocab.find(b);
    if (ia && ib) out.emplace_back(*ia, *ib);
  }
  return out;
}

double cosine(const Matrix& table, Index a, Index b) {
  const auto ra = table.row(a), rb = table.row(b);
  const double na = ra.norm(), nb = rb.norm();
  if (na == 0.0 || nb == 0.0) throw ValidationError("zero-norm embedding row " + std::to_string(na == 0.0 ? a : b));
  return ra.dot(rb) / (na * nb);
}

namespace {

std::vector<std::pair<Index, Index>> checked_pairs(const Matrix& table, const Vocabulary& vocab,
                                                   const BilingualDictionary& dict) {
  if (static_cast<std::size_t>(table.rows()) != vocab.size())
    throw ValidationError("embedding table has " + std::to_string(table.rows()) + " rows, vocabulary " +
                          std::to_string(vocab.size()));
  auto pairs = surviving_pairs(dict, vocab);
  if (pairs.empty())
    throw ValidationError("no " + dict.lang_a + "-" + dict.lang_b + " dictionary pair survives the vocabulary intersection");
  return pairs;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

double pair_similarity(const Matrix& table, const Vocabulary& vocab, const BilingualDictionary& dict) {
  const auto pairs = checked_pairs(table, vocab, dict);
  double sum = 0.0;
  for (const auto& [a, b] : pairs) sum += cosine(table, a, b);
  return sum / static_cast<double>(pairs.size());
}

double isotropy(const Matrix& table, const Vocabulary& vocab, const BilingualDictionary& dict, std::size_t n_samples,
                std::uint64_t seed, bool include_reserved) {
  if (n_samples == 0) throw ValidationError("isotropy needs at least one sample");
  const auto pairs = checked_pairs(table, vocab, dict);
  std::vector<Index> words;
  for (const auto& [a, b] : pairs) words.push_back(a);
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());

  const Index first = include_reserved ? 0 : static_cast<Index>(Vocabulary::kNumSpecials + vocab.tags().size());
  if (first >= vocab.size()) throw ValidationError("vocabulary has nothing to sample");
  const auto span = static_cast<std::uint64_t>(vocab.size() - first);
  Rng rng(seed);
  double total = 0.0;
  for (Index w : words) {
    double s = 0.0;
    for (std::size_t k = 0; k < n_samples; ++k) s += cosine(table, w, static_cast<Index>(first + rng.below(span)));
    total += s / static_cast<double>(n_samples);
  }
  return total / static_cast<double>(words.size());
}

BilingualDictionary induce_zero_shot_dict(const BilingualDictionary& en_a, const BilingualDictionary& en_b) {
  if (en_a.lang_a != en_b.lang_a)
    throw ValidationError("zero-shot induction needs the pivot on the same side: " + en_a.lang_a + "-" + en_a.lang_b +
                          " vs " + en_b.lang_a + "-" + en_b.lang_b);
  std::map<std::string, std::vector<std::string>> by_key;
  for (const auto& [e, w] : en_b.pairs) by_key[e].push_back(w);
  BilingualDictionary out{en_a.lang_b, en_b.lang_b, {}};
  for (const auto& [e, wa] : en_a.pairs) {
    auto it = by_key.find(e);
    if (it == by_key.end()) continue;
    for (const auto& wb : it->second) out.add(wa, wb);
  }
  return out;
}

double bleu(std::span<const Sentence> hypotheses, std::span<const Sentence> references) {
  if (hypotheses.size() != references.size())
    throw ValidationError("bleu: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                          std::to_string(references.size()) + " references");
  if (hypotheses.empty()) throw ValidationError("bleu: empty corpus");
  constexpr std::size_t kOrder = 4;
  std::array<double, kOrder> matched{}, total{};
  double hyp_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto& h = hypotheses[s];
    const auto& r = references[s];
    hyp_len += static_cast<double>(h.size());
    ref_len += static_cast<double>(r.size());
    for (std::size_t n = 1; n <= kOrder; ++n) {
      std::map<std::vector<std::string>, std::size_t> ref_counts, hyp_counts;
      for (std::size_t i = 0; i + n <= r.size(); ++i) ++ref_counts[{r.begin() + i, r.begin() + i + n}];
      for (std::size_t i = 0; i + n <= h.size(); ++i) ++hyp_counts[{h.begin() + i, h.begin() + i + n}];
      for (const auto& [g, c] : hyp_counts) {
        auto it = ref_counts.find(g);
        if (it != ref_counts.end()) matched[n - 1] += static_cast<double>(std::min(c, it->second));
      }
      if (h.size() >= n) total[n - 1] += static_cast<double>(h.size() - n + 1);
    }
  }
  double log_p = 0.0;
  for (std::size_t n = 0; n < kOrder; ++n) {
    if (matched[n] == 0.0 || total[n] == 0.0) return 0.0;
    log_p += std::log(matched[n] / total[n]) / static_cast<double>(kOrder);
  }
  const double bp = hyp_len < ref_len ? std::exp(1.0 - ref_len / hyp_len) : 1.0;
  return 100.0 * bp * std::exp(log_p);
}

TableMode parse_table_mode(std::string_view name) {
  if (name == "original") return TableMode::kOriginal;
  if (name == "reparam") return TableMode::kReparam;
  throw ValidationError("unknown table mode '" + std::string(name) + "' (expected original or reparam)");
}

std::string_view table_mode_name(TableMode mode) { return mode == TableMode::kOriginal ? "original" : "reparam"; }

std::vector<SimilarityReport> similarity_suite(const Matrix& table, const Vocabulary& vocab,
                                               std::span<const BilingualDictionary> dicts, TableMode mode,
                                               std::uint64_t seed, std::size_t n_samples, bool include_reserved) {
  std::vector<SimilarityReport> out;
  for (const auto& d : dicts) {
    SimilarityReport r;
    r.pair = d.lang_a + "-" + d.lang_b;
    r.mode = mode;
    r.seed = derive_seed(seed, "isotropy." + r.pair);
    r.n_pairs = surviving_pairs(d, vocab).size();
    r.mean_similarity = pair_similarity(table, vocab, d);
    r.isotropy = isotropy(table, vocab, d, n_samples, r.seed, include_reserved);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SimilarityReport> similarity_suite(const nmt::TranslationModel& model,
                                               std::span<const BilingualDictionary> dicts, TableMode mode,
                                               std::uint64_t seed, std::size_t n_samples, bool include_reserved) {
  if (mode == TableMode::kReparam && model.config().hops == 0)
    throw ValidationError("reparam mode needs a model with a graph stack (hops > 0)");
  const Matrix table = mode == TableMode::kReparam ? model.reparam_table() : model.original_table();
  return similarity_suite(table, model.vocab(), dicts, mode, seed, n_samples, include_reserved);
}

std::string similarity_csv(std::span<const SimilarityReport> reports, std::string_view provenance) {
  std::ostringstream o;
  if (!provenance.empty()) o << "# " << provenance << "\n";
  o << "pair,mode,mean_similarity,isotropy,n_pairs,seed\n";
  for (const auto& r : reports)
    o << r.pair << "," << table_mode_name(r.mode) << "," << fixed(r.mean_similarity, 6) << "," << fixed(r.isotropy, 6)
      << "," << r.n_pairs << "," << r.seed << "\n";
  return o.str();
}

}  // namespace graphmerge
