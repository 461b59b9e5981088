#include "graphmerge/aligner.hpp"

#include "graphmerge/binary_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_set>

namespace graphmerge {
namespace {

struct EncodedPair {
  std::vector<Index> src;
  std::vector<Index> tgt;  // kNullToken appended last
};

std::vector<EncodedPair> encode_corpus(const BitextCorpus& corpus, const Vocabulary& vocab) {
  std::vector<EncodedPair> out;
  out.reserve(corpus.size());
  for (const auto& p : corpus.pairs) {
    EncodedPair e{vocab.encode(p.src), vocab.encode(p.tgt)};
    e.tgt.push_back(kNullToken);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

double LexicalTable::prob(Index src, Index tgt) const {
  auto it = table_.find(key(src, tgt));
  return it == table_.end() ? 0.0 : it->second;
}

double LexicalTable::mass(Index tgt) const {
  double total = 0.0;
  for (const auto& [k, p] : table_)
    if (static_cast<Index>(k & 0xffffffffu) == tgt) total += p;
  return total;
}

LexicalTable train_ibm1(const BitextCorpus& corpus, const Vocabulary& vocab, int iterations) {
  if (iterations < 1) throw ValidationError("train_ibm1: iterations must be >= 1");
  if (corpus.pairs.empty()) throw ValidationError("train_ibm1: empty corpus");
  const auto data = encode_corpus(corpus, vocab);

  std::unordered_set<Index> source_types;
  for (const auto& e : data) source_types.insert(e.src.begin(), e.src.end());
  const double uniform = 1.0 / static_cast<double>(source_types.size());

  LexicalTable table;
  for (const auto& e : data)
    for (Index s : e.src)
      for (Index t : e.tgt) table.set(s, t, uniform);

  std::unordered_map<std::uint64_t, double> counts;
  std::unordered_map<Index, double> totals;
  std::vector<double> probs;
  for (int it = 0; it < iterations; ++it) {
    counts.clear();
    totals.clear();
    for (const auto& e : data) {
      probs.resize(e.tgt.size());
      for (Index s : e.src) {
        double z = 0.0;
        for (std::size_t j = 0; j < e.tgt.size(); ++j) z += probs[j] = table.prob(s, e.tgt[j]);
        for (std::size_t j = 0; j < e.tgt.size(); ++j) {
          const double c = probs[j] / z;
          counts[(std::uint64_t{s} << 32) | e.tgt[j]] += c;
          totals[e.tgt[j]] += c;
        }
      }
    }
    for (const auto& [k, c] : counts) {
      const auto tgt = static_cast<Index>(k & 0xffffffffu);
      table.set(static_cast<Index>(k >> 32), tgt, c / totals.at(tgt));
    }
  }
  return table;
}

double ibm1_log_likelihood(const LexicalTable& table, const BitextCorpus& corpus, const Vocabulary& vocab) {
  double ll = 0.0;
  for (const auto& e : encode_corpus(corpus, vocab)) {
    const double norm = static_cast<double>(e.tgt.size());
    for (Index s : e.src) {
      double z = 0.0;
      for (Index t : e.tgt) z += table.prob(s, t);
      ll += std::log(z / norm);
    }
  }
  return ll;
}

SentenceAlignment viterbi_align(const LexicalTable& table, const Vocabulary& vocab, const Sentence& src,
                                const Sentence& tgt) {
  const auto s_ids = vocab.encode(src);
  const auto t_ids = vocab.encode(tgt);
  SentenceAlignment out;
  for (std::uint32_t i = 0; i < s_ids.size(); ++i) {
    double best = 0.0;
    std::uint32_t best_j = 0;
    for (std::uint32_t j = 0; j < t_ids.size(); ++j) {
      const double p = table.prob(s_ids[i], t_ids[j]);
      if (p > best) {
        best = p;
        best_j = j;
      }
    }
    if (best > 0.0 && !(table.prob(s_ids[i], kNullToken) > best)) out.emplace(i, best_j);
  }
  return out;
}

SymmetrizeStrategy parse_strategy(std::string_view name) {
  if (name == "intersect") return SymmetrizeStrategy::kIntersect;
  if (name == "union") return SymmetrizeStrategy::kUnion;
  if (name == "gdfa" || name == "grow-diag-final-and") return SymmetrizeStrategy::kGrowDiagFinalAnd;
  throw ValidationError("unknown symmetrization strategy '" + std::string(name) + "'");
}

std::string_view strategy_name(SymmetrizeStrategy s) {
  switch (s) {
    case SymmetrizeStrategy::kIntersect: return "intersect";
    case SymmetrizeStrategy::kUnion: return "union";
    case SymmetrizeStrategy::kGrowDiagFinalAnd: return "gdfa";
  }
  return "?";
}

SentenceAlignment transpose(const SentenceAlignment& a) {
  SentenceAlignment out;
  for (const auto& [i, j] : a) out.emplace(j, i);
  return out;
}

SentenceAlignment symmetrize(const SentenceAlignment& fwd, const SentenceAlignment& bwd, SymmetrizeStrategy strategy) {
  SentenceAlignment inter;
  std::ranges::set_intersection(fwd, bwd, std::inserter(inter, inter.end()));
  if (strategy == SymmetrizeStrategy::kIntersect) return inter;
  SentenceAlignment uni;
  std::ranges::set_union(fwd, bwd, std::inserter(uni, uni.end()));
  if (strategy == SymmetrizeStrategy::kUnion) return uni;

  // grow-diag-final-and
  SentenceAlignment result = inter;
  std::unordered_set<std::uint32_t> src_aligned, tgt_aligned;
  for (const auto& [i, j] : result) {
    src_aligned.insert(i);
    tgt_aligned.insert(j);
  }
  const auto add = [&](AlignmentLink link) {
    result.insert(link);
    src_aligned.insert(link.first);
    tgt_aligned.insert(link.second);
  };
  static constexpr int kNeighbors[8][2] = {{-1, 0}, {0, -1}, {1, 0}, {0, 1}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
  bool grew = true;
  while (grew) {
    grew = false;
    // std::set iterators survive insertion; links added ahead of `it` are
    // visited in the same sweep.
    for (auto it = result.begin(); it != result.end(); ++it) {
      for (const auto& d : kNeighbors) {
        const long ci = static_cast<long>(it->first) + d[0];
        const long cj = static_cast<long>(it->second) + d[1];
        if (ci < 0 || cj < 0) continue;
        const AlignmentLink cand{static_cast<std::uint32_t>(ci), static_cast<std::uint32_t>(cj)};
        if (!uni.contains(cand) || result.contains(cand)) continue;
        if (!src_aligned.contains(cand.first) || !tgt_aligned.contains(cand.second)) {
          add(cand);
          grew = true;
        }
      }
    }
  }
  for (const auto* dir : {&fwd, &bwd})
    for (const auto& link : *dir)
      if (!src_aligned.contains(link.first) && !tgt_aligned.contains(link.second)) add(link);
  return result;
}

SentenceAlignment parse_pharaoh(std::string_view line) {
  SentenceAlignment out;
  for (const auto& tok : split_tokens(line)) {
    const auto dash = tok.find('-');
    if (dash == std::string::npos || dash == 0 || dash + 1 == tok.size())
      throw ValidationError("malformed alignment link '" + tok + "'");
    std::uint32_t i = 0, j = 0;
    const char* first = tok.data();
    const char* mid = first + dash;
    const char* last = first + tok.size();
    if (tok[0] == '-' || tok[dash + 1] == '-') throw ValidationError("negative alignment index in '" + tok + "'");
    auto r1 = std::from_chars(first, mid, i);
    auto r2 = std::from_chars(mid + 1, last, j);
    if (r1.ec != std::errc() || r1.ptr != mid || r2.ec != std::errc() || r2.ptr != last)
      throw ValidationError("malformed alignment link '" + tok + "'");
    out.emplace(i, j);
  }
  return out;
}

std::string emit_pharaoh(const SentenceAlignment& a) {
  std::string out;
  for (const auto& [i, j] : a) {
    if (!out.empty()) out += ' ';
    out += std::to_string(i);
    out += '-';
    out += std::to_string(j);
  }
  return out;
}

std::vector<SentenceAlignment> read_pharaoh_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open alignment file: " + path.string());
  std::vector<SentenceAlignment> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] == '#') continue;
    try {
      out.push_back(parse_pharaoh(line));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_pharaoh_file(const std::filesystem::path& path, const std::vector<SentenceAlignment>& alignments,
                        const std::vector<std::string>& header_lines) {
  std::string out;
  for (const auto& h : header_lines) out += "# " + h + '\n';
  for (const auto& a : alignments) out += emit_pharaoh(a) + '\n';
  write_file_atomic(path, out);
}

void check_alignment_bounds(const SentenceAlignment& a, std::size_t src_len, std::size_t tgt_len) {
  for (const auto& [i, j] : a)
    if (i >= src_len || j >= tgt_len)
      throw ValidationError("alignment link " + std::to_string(i) + "-" + std::to_string(j) + " outside a " +
                            std::to_string(src_len) + "x" + std::to_string(tgt_len) + " sentence pair");
}

DirectionalAlignments align_corpus(const BitextCorpus& corpus, const Vocabulary& vocab, int iterations) {
  const auto fwd_table = train_ibm1(corpus, vocab, iterations);
  const auto rev = corpus.reversed();
  const auto bwd_table = train_ibm1(rev, vocab, iterations);
  DirectionalAlignments out;
  out.forward.reserve(corpus.size());
  out.backward.reserve(corpus.size());
  for (const auto& p : corpus.pairs) {
    out.forward.push_back(viterbi_align(fwd_table, vocab, p.src, p.tgt));
    out.backward.push_back(transpose(viterbi_align(bwd_table, vocab, p.tgt, p.src)));
  }
  return out;
}

}  // namespace graphmerge
