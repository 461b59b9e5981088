#include "graphmerge/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "graphmerge/binary_io.hpp"

namespace graphmerge {
namespace {

constexpr std::string_view kGraphMagic{"GMGRAPH\0", 8};
constexpr std::uint32_t kGraphVersion = 1;
constexpr double kRowTolerance = 1e-9;

bool is_pure_self_loop(const SparseMatrix& m, std::size_t r) {
  const auto idx = m.row_indices(r);
  return idx.size() == 1 && idx[0] == r && m.row_values(r)[0] == 1.0;
}

}  // namespace

CountMatrix CountMatrix::transposed() const {
  CountMatrix out{tgt_lang, src_lang, dim, {}};
  for (const auto& [ij, c] : counts) out.counts.emplace(std::pair{ij.second, ij.first}, c);
  return out;
}

CountMatrix accumulate_counts(const BitextCorpus& corpus, std::span<const SentenceAlignment> alignments,
                              const Vocabulary& vocab) {
  if (alignments.size() != corpus.size())
    throw ValidationError("accumulate_counts: " + std::to_string(alignments.size()) + " alignments for " +
                          std::to_string(corpus.size()) + " sentence pairs");
  CountMatrix out{corpus.src_lang, corpus.tgt_lang, vocab.size(), {}};
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    const auto& pair = corpus.pairs[n];
    check_alignment_bounds(alignments[n], pair.src.size(), pair.tgt.size());
    for (const auto& [i, j] : alignments[n]) {
      const Index s = vocab.lookup(pair.src[i]);
      const Index t = vocab.lookup(pair.tgt[j]);
      if (s == t || vocab.is_reserved(s) || vocab.is_reserved(t)) continue;
      ++out.counts[{s, t}];
    }
  }
  return out;
}

GraphFragment normalize_bilingual(const CountMatrix& counts) {
  std::vector<std::vector<SparseMatrix::Entry>> rows(counts.dim);
  // std::map orders by (row, col), so each row's entries arrive contiguously.
  auto it = counts.counts.begin();
  while (it != counts.counts.end()) {
    const Index row = it->first.first;
    if (row >= counts.dim) throw ValidationError("count matrix row out of range");
    auto end = it;
    std::uint64_t total = 0;
    for (; end != counts.counts.end() && end->first.first == row; ++end) total += end->second;
    for (; it != end; ++it)
      rows[row].emplace_back(it->first.second, static_cast<double>(it->second) / static_cast<double>(total));
  }
  return {counts.src_lang, counts.tgt_lang, SparseMatrix::from_rows(counts.dim, std::move(rows))};
}

EquivalenceGraph::EquivalenceGraph(SparseMatrix matrix, const Vocabulary* vocab) : matrix_(std::move(matrix)) {
  if (matrix_.rows() != matrix_.cols()) throw ValidationError("equivalence graph must be square");
  if (vocab && vocab->size() != matrix_.rows())
    throw ValidationError("equivalence graph has " + std::to_string(matrix_.rows()) + " rows for a vocabulary of " +
                          std::to_string(vocab->size()));
  for (std::size_t r = 0; r < matrix_.rows(); ++r) {
    if (is_pure_self_loop(matrix_, r)) continue;
    const auto idx = matrix_.row_indices(r);
    const auto val = matrix_.row_values(r);
    if (idx.empty()) throw ValidationError("graph row " + std::to_string(r) + " is empty");
    if (vocab && vocab->is_reserved(static_cast<Index>(r)))
      throw ValidationError("reserved token row " + std::to_string(r) + " is not a self-loop");
    double sum = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] == r) throw ValidationError("graph row " + std::to_string(r) + " mixes a self entry with neighbours");
      if (!(val[k] >= 0.0 && val[k] <= 1.0)) throw ValidationError("graph value outside [0,1] in row " + std::to_string(r));
      sum += val[k];
    }
    if (std::abs(sum - 1.0) > kRowTolerance)
      throw ValidationError("graph row " + std::to_string(r) + " sums to " + std::to_string(sum));
  }
}

bool EquivalenceGraph::is_self_loop_row(Index i) const { return is_pure_self_loop(matrix_, i); }

std::size_t EquivalenceGraph::edge_count() const {
  std::size_t n = 0;
  for (std::size_t r = 0; r < matrix_.rows(); ++r)
    if (!is_pure_self_loop(matrix_, r)) n += matrix_.row_size(r);
  return n;
}

EquivalenceGraph merge_graphs(std::span<const GraphFragment> fragments, const Vocabulary& vocab) {
  const std::size_t n = vocab.size();
  for (const auto& f : fragments)
    if (f.alpha.rows() != n || f.alpha.cols() != n)
      throw ValidationError("fragment " + f.src_lang + "-" + f.tgt_lang + " is " + std::to_string(f.alpha.rows()) +
                            "x" + std::to_string(f.alpha.cols()) + ", vocabulary has " + std::to_string(n));

  std::vector<std::vector<SparseMatrix::Entry>> rows(n);
  std::map<Index, std::vector<double>> contributions;
  for (std::size_t r = 0; r < n; ++r) {
    const auto id = static_cast<Index>(r);
    if (!vocab.is_reserved(id)) {
      contributions.clear();
      for (const auto& f : fragments) {
        const auto idx = f.alpha.row_indices(r);
        const auto val = f.alpha.row_values(r);
        for (std::size_t k = 0; k < idx.size(); ++k)
          if (idx[k] != id && val[k] > 0.0) contributions[idx[k]].push_back(val[k]);
      }
      // Summing each entry's contributions in sorted order makes the result
      // independent of fragment order, bit for bit.
      double total = 0.0;
      for (auto& [col, vals] : contributions) {
        std::ranges::sort(vals);
        double s = 0.0;
        for (double v : vals) s += v;
        rows[r].emplace_back(col, s);
        total += s;
      }
      for (auto& e : rows[r]) e.second /= total;
    }
    if (rows[r].empty()) rows[r].emplace_back(id, 1.0);
  }
  return EquivalenceGraph(SparseMatrix::from_rows(n, std::move(rows)), &vocab);
}

std::set<Index> khop_neighbors(const EquivalenceGraph& graph, Index i, int hops) {
  if (hops < 1) throw ValidationError("khop_neighbors: hops must be >= 1");
  if (i >= graph.size()) throw ValidationError("khop_neighbors: index " + std::to_string(i) + " out of range");
  const auto& m = graph.matrix();
  std::set<Index> seen{i};
  std::vector<Index> frontier{i};
  for (int h = 0; h < hops && !frontier.empty(); ++h) {
    std::vector<Index> next;
    for (Index u : frontier) {
      if (graph.is_self_loop_row(u)) continue;
      for (Index v : m.row_indices(u))
        if (seen.insert(v).second) next.push_back(v);
    }
    frontier = std::move(next);
  }
  seen.erase(i);
  return seen;
}

std::string serialize_graph(const EquivalenceGraph& graph, std::string_view provenance) {
  const auto& m = graph.matrix();
  ByteWriter payload;
  payload.bytes(provenance);
  for (auto p : m.row_ptr()) payload.u64(p);
  for (auto c : m.col_idx()) payload.u32(c);
  for (auto v : m.values()) payload.f64(v);

  ByteWriter out;
  out.bytes(kGraphMagic);
  out.u32(kGraphVersion);
  out.u32(static_cast<std::uint32_t>(provenance.size()));
  out.u64(m.rows());
  out.u64(m.nnz());
  out.u32(crc32_of(payload.buffer()));
  out.u32(0);
  out.bytes(payload.buffer());
  return std::move(out.buffer());
}

EquivalenceGraph deserialize_graph(std::string_view bytes, std::string* provenance) {
  ByteReader in(bytes, "graph file");
  if (in.bytes(kGraphMagic.size()) != kGraphMagic) throw ValidationError("not a graph file (bad magic)");
  const auto version = in.u32();
  if (version != kGraphVersion)
    throw ValidationError("graph file version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kGraphVersion) + ")");
  const auto meta_len = in.u32();
  const auto n = in.u64();
  const auto nnz = in.u64();
  const auto checksum = in.u32();
  in.u32();
  const std::size_t expected = meta_len + (n + 1) * 8 + nnz * 12;
  if (in.remaining() < expected) throw ValidationError("truncated graph file");
  if (in.remaining() > expected) throw ValidationError("graph file has trailing bytes");
  if (crc32_of(in.rest()) != checksum) throw ValidationError("graph file checksum mismatch");

  std::string meta(in.bytes(meta_len));
  std::vector<std::uint64_t> row_ptr(n + 1);
  for (auto& p : row_ptr) p = in.u64();
  std::vector<Index> cols(nnz);
  for (auto& c : cols) c = in.u32();
  std::vector<double> vals(nnz);
  for (auto& v : vals) v = in.f64();
  if (provenance) *provenance = std::move(meta);
  return EquivalenceGraph(SparseMatrix::from_csr(n, std::move(row_ptr), std::move(cols), std::move(vals)));
}

void save_graph(const EquivalenceGraph& graph, const std::filesystem::path& path, std::string_view provenance) {
  write_file_atomic(path, serialize_graph(graph, provenance));
}

EquivalenceGraph load_graph(const std::filesystem::path& path, std::string* provenance) {
  return deserialize_graph(read_file(path), provenance);
}

void export_graph_tsv(const EquivalenceGraph& graph, const std::filesystem::path& path, std::string_view provenance) {
  std::ostringstream out;
  if (!provenance.empty()) {
    std::istringstream lines{std::string(provenance)};
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << '\n';
  }
  const auto& m = graph.matrix();
  char buf[64];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto idx = m.row_indices(r);
    const auto val = m.row_values(r);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", val[k]);
      out << r << '\t' << idx[k] << '\t' << buf << '\n';
    }
  }
  write_file_atomic(path, out.str());
}

std::vector<std::uint64_t> token_language_masks(const CorpusCollection& collection, const Vocabulary& vocab) {
  const auto& langs = collection.languages();
  if (langs.size() > 64) throw ValidationError("at most 64 languages are supported");
  const auto bit = [&langs](const std::string& lang) {
    return std::uint64_t{1} << (std::ranges::find(langs, lang) - langs.begin());
  };
  std::vector<std::uint64_t> masks(vocab.size(), 0);
  for (const auto& c : collection.corpora()) {
    const auto sb = bit(c.src_lang), tb = bit(c.tgt_lang);
    for (const auto& p : c.pairs) {
      for (const auto& t : p.src) masks[vocab.lookup(t)] |= sb;
      for (const auto& t : p.tgt) masks[vocab.lookup(t)] |= tb;
    }
  }
  return masks;
}

GraphAudit audit_graph(const EquivalenceGraph& graph, const CorpusCollection& collection, const Vocabulary& vocab,
                       std::string_view pivot) {
  GraphAudit a;
  const auto& m = graph.matrix();
  a.rows = m.rows();
  a.min_value = m.nnz() ? 1.0 : 0.0;
  const auto masks = token_language_masks(collection, vocab);
  std::uint64_t pivot_bit = 0;
  const auto& langs = collection.languages();
  if (auto it = std::ranges::find(langs, pivot); it != langs.end()) pivot_bit = std::uint64_t{1} << (it - langs.begin());
  const auto non_pivot = [&](Index t) { return t < masks.size() && masks[t] != 0 && !(masks[t] & pivot_bit); };

  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto idx = m.row_indices(r);
    const auto val = m.row_values(r);
    double sum = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      sum += val[k];
      a.min_value = std::min(a.min_value, val[k]);
      a.max_value = std::max(a.max_value, val[k]);
      if (idx[k] != r && non_pivot(static_cast<Index>(r)) && non_pivot(idx[k])) a.non_pivot_mass += val[k];
    }
    a.max_row_error = std::max(a.max_row_error, std::abs(sum - 1.0));
    if (graph.is_self_loop_row(static_cast<Index>(r)))
      ++a.self_loop_rows;
    else
      a.edges += idx.size();
  }
  return a;
}

EquivalenceGraph build_equivalence_graph(const CorpusCollection& collection,
                                         std::span<const std::vector<SentenceAlignment>> alignments,
                                         const Vocabulary& vocab) {
  if (alignments.size() != collection.size())
    throw ValidationError("one alignment list per corpus required");
  std::vector<GraphFragment> fragments;
  for (std::size_t c = 0; c < collection.size(); ++c) {
    const auto counts = accumulate_counts(collection[c], alignments[c], vocab);
    fragments.push_back(normalize_bilingual(counts));
    fragments.push_back(normalize_bilingual(counts.transposed()));
  }
  return merge_graphs(fragments, vocab);
}

}  // namespace graphmerge
