#include "graphmerge/pipeline.hpp"

#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "graphmerge/analysis.hpp"
#include "graphmerge/binary_io.hpp"
#include "graphmerge/graph.hpp"
#include "graphmerge/nmt/model.hpp"
#include "graphmerge/nmt/train.hpp"
#include "graphmerge/rng.hpp"
#include "graphmerge/toy.hpp"

namespace graphmerge::pipeline {
namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// Corpus identity for config hashes: direction plus a content hash, so
/// the hash does not depend on where the file lives.
std::string describe(const std::vector<CorpusSpec>& specs) {
  std::string out;
  for (const auto& s : specs) out += s.name() + ":" + hex64(fnv1a64(read_file(s.path))) + ";";
  return out;
}

std::filesystem::path alignment_path(const std::filesystem::path& dir, const CorpusSpec& s, std::string_view ext) {
  return dir / (s.name() + "." + std::string(ext));
}

void check_alignments(const std::vector<SentenceAlignment>& a, const BitextCorpus& corpus, bool reversed,
                      const std::filesystem::path& file) {
  if (a.size() != corpus.size())
    throw ValidationError(file.string() + " has " + std::to_string(a.size()) + " alignment lines but the corpus has " +
                          std::to_string(corpus.size()) + " sentence pairs");
  for (std::size_t s = 0; s < a.size(); ++s) {
    const auto& p = corpus.pairs[s];
    try {
      if (reversed) check_alignment_bounds(a[s], p.tgt.size(), p.src.size());
      else check_alignment_bounds(a[s], p.src.size(), p.tgt.size());
    } catch (const ValidationError& e) {
      throw ValidationError(file.string() + " line " + std::to_string(s + 1) + ": " + e.what());
    }
  }
}

}  // namespace

CorpusSpec CorpusSpec::parse(std::string_view text) {
  const auto eq = text.find('=');
  const auto dash = text.substr(0, eq).find('-');
  if (eq == std::string_view::npos || dash == std::string_view::npos || dash == 0 || dash + 1 >= eq || eq + 1 >= text.size())
    throw ValidationError("expected SRC-TGT=PATH, got '" + std::string(text) + "'");
  return {std::string(text.substr(0, dash)), std::string(text.substr(dash + 1, eq - dash - 1)),
          std::filesystem::path(std::string(text.substr(eq + 1)))};
}

CorpusCollection load_corpora(const std::vector<CorpusSpec>& specs, std::ostream& log) {
  if (specs.empty()) throw ValidationError("no corpora given");
  CorpusCollection c;
  for (const auto& s : specs) {
    if (!std::filesystem::exists(s.path)) throw ValidationError("corpus file not found: " + s.path.string());
    auto corpus = load_bitext(s.path, s.src, s.tgt);
    if (corpus.stats.rejected_lines > 0)
      log << "warning: " << s.path.string() << ": skipped " << corpus.stats.rejected_lines << " malformed line(s)\n";
    c.add(std::move(corpus));
  }
  return c;
}

std::string provenance(std::string_view command, std::string_view canonical_config, std::uint64_t seed) {
  return "graphmerge " + std::string(command) + " version=" + kVersion + " config=" + hex64(fnv1a64(canonical_config)) +
         " seed=" + std::to_string(seed);
}

void cmd_align(const AlignOptions& o, std::ostream& log) {
  const auto collection = load_corpora(o.corpora, log);
  const bool import = !o.import_forward.empty() || !o.import_backward.empty();
  if (import && (o.import_forward.size() != o.corpora.size() || o.import_backward.size() != o.corpora.size()))
    throw ValidationError("import mode needs one forward and one backward file per corpus");
  if (!import && o.iterations < 1) throw ValidationError("iterations must be at least 1");
  const auto vocab = Vocabulary::build(collection);

  std::string canon = describe(o.corpora) + "strategy=" + std::string(strategy_name(o.strategy));
  if (import) {
    for (std::size_t i = 0; i < o.corpora.size(); ++i)
      canon += ";import=" + hex64(fnv1a64(read_file(o.import_forward[i]))) + "," +
               hex64(fnv1a64(read_file(o.import_backward[i])));
  } else {
    canon += ";iterations=" + std::to_string(o.iterations);
  }
  const auto prov = provenance("align", canon, 0);

  struct Output {
    std::vector<SentenceAlignment> fwd, bwd, sym;
  };
  std::vector<Output> outputs;
  for (std::size_t i = 0; i < collection.size(); ++i) {
    const auto& corpus = collection[i];
    Output out;
    if (import) {
      out.fwd = read_pharaoh_file(o.import_forward[i]);
      check_alignments(out.fwd, corpus, false, o.import_forward[i]);
      const auto bwd_raw = read_pharaoh_file(o.import_backward[i]);
      check_alignments(bwd_raw, corpus, true, o.import_backward[i]);
      for (const auto& a : bwd_raw) out.bwd.push_back(transpose(a));
    } else {
      auto dir = align_corpus(corpus, vocab, o.iterations);
      out.fwd = std::move(dir.forward);
      out.bwd = std::move(dir.backward);
    }
    std::size_t links = 0;
    for (std::size_t s = 0; s < corpus.size(); ++s) {
      out.sym.push_back(symmetrize(out.fwd[s], out.bwd[s], o.strategy));
      links += out.sym.back().size();
    }
    log << o.corpora[i].name() << ": " << corpus.size() << " pairs, " << links << " symmetrized links ("
        << strategy_name(o.strategy) << ")\n";
    outputs.push_back(std::move(out));
  }

  std::filesystem::create_directories(o.out_dir);
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const auto& s = o.corpora[i];
    const std::vector<std::string> header{prov, "corpus=" + s.name(), "strategy=" + std::string(strategy_name(o.strategy))};
    auto h = header;
    h.push_back("direction=forward");
    write_pharaoh_file(alignment_path(o.out_dir, s, "fwd"), outputs[i].fwd, h);
    h.back() = "direction=backward (source-target order)";
    write_pharaoh_file(alignment_path(o.out_dir, s, "bwd"), outputs[i].bwd, h);
    h.back() = "direction=symmetrized";
    write_pharaoh_file(alignment_path(o.out_dir, s, "sym"), outputs[i].sym, h);
  }
}

void cmd_graph(const GraphOptions& o, std::ostream& log) {
  const auto collection = load_corpora(o.corpora, log);
  const auto vocab = Vocabulary::build(collection);
  std::vector<std::vector<SentenceAlignment>> alignments;
  std::string canon = describe(o.corpora) + "pivot=" + o.pivot;
  std::size_t links = 0;
  for (std::size_t i = 0; i < collection.size(); ++i) {
    const auto path = alignment_path(o.alignment_dir, o.corpora[i], "sym");
    if (!std::filesystem::exists(path)) throw ValidationError("alignment file not found: " + path.string());
    auto a = read_pharaoh_file(path);
    check_alignments(a, collection[i], false, path);
    for (const auto& s : a) links += s.size();
    canon += ";" + hex64(fnv1a64(read_file(path)));
    alignments.push_back(std::move(a));
  }
  if (links == 0) log << "warning: no alignment links; the graph is pure self-loops\n";

  const auto graph = build_equivalence_graph(collection, alignments, vocab);
  const auto audit = audit_graph(graph, collection, vocab, o.pivot);
  log << "graph: " << audit.rows << " rows, " << audit.edges << " edges, " << audit.self_loop_rows << " self-loop rows\n"
      << "audit: max |row sum - 1| = " << audit.max_row_error << ", values in [" << audit.min_value << ", "
      << audit.max_value << "]\n"
      << "non-" << o.pivot << " x non-" << o.pivot << " block mass: " << audit.non_pivot_mass
      << (audit.non_pivot_mass == 0.0 ? " (empty)" : "") << "\n";
  if (!audit.ok()) throw RuntimeError("graph audit failed");

  const auto prov = provenance("graph", canon, 0);
  std::filesystem::create_directories(o.out_dir);
  vocab.save(o.out_dir / "vocab.txt");
  save_graph(graph, o.out_dir / "graph.bin", prov);
  if (o.export_tsv) export_graph_tsv(graph, o.out_dir / "graph.tsv", prov);
}

void cmd_train(const TrainOptions& o, std::ostream& log) {
  o.model.validate();
  const auto train = load_corpora(o.train, log);
  const auto dev = load_corpora(o.dev, log);
  auto vocab = o.vocab.empty() ? Vocabulary::build(train) : Vocabulary::load(o.vocab);
  for (const auto& lang : train.languages()) vocab.tag(lang);
  std::optional<EquivalenceGraph> graph;
  std::string canon = describe(o.train) + describe(o.dev) + o.model.to_ini();
  if (o.model.hops > 0) {
    if (o.graph.empty()) throw ValidationError("hops > 0 needs --graph");
    graph = load_graph(o.graph);
    canon += "graph=" + hex64(fnv1a64(read_file(o.graph)));
    if (graph->size() != vocab.size())
      throw ValidationError("graph has " + std::to_string(graph->size()) + " rows but the vocabulary has " +
                            std::to_string(vocab.size()) + " tokens");
    graph = EquivalenceGraph(graph->matrix(), &vocab);
  }
  const auto prov = provenance("train", canon, o.seed);
  nmt::TranslationModel model(o.model, std::move(vocab), std::move(graph), o.seed);
  const auto pc = model.parameter_count();
  log << "parameters: " << pc.total << " trainable, " << pc.graph << " in the graph stack ("
      << fixed(100.0 * pc.graph_fraction(), 3) << "%)\n";

  nmt::TrainOptions opts;
  opts.out_dir = o.out_dir;
  opts.provenance = prov;
  opts.on_log = [&](const nmt::LogRow& r) {
    log << "step " << r.step << " lr " << fixed(r.lr, 6) << " train " << fixed(r.train_loss, 4) << " dev "
        << fixed(r.dev_loss, 4) << " wps " << fixed(r.wps, 0) << "\n";
  };
  const auto res = nmt::train(model, train, dev, o.seed, opts);
  log << "best dev loss " << fixed(res.best_dev_loss, 4) << " at step " << res.best_step
      << (res.early_stopped ? " (early stop)" : "") << "\n";
}

void cmd_analyze(const AnalyzeOptions& o, std::ostream& log) {
  const auto model = nmt::TranslationModel::load(o.checkpoint);
  std::vector<BilingualDictionary> dicts;
  for (const auto& s : o.dictionaries) dicts.push_back(BilingualDictionary::load(s.path, s.src, s.tgt));
  if (o.zero_shot) {
    const auto n = dicts.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (dicts[i].lang_a == o.pivot && dicts[j].lang_a == o.pivot && dicts[i].lang_b != dicts[j].lang_b) {
          auto z = induce_zero_shot_dict(dicts[i], dicts[j]);
          if (!z.empty()) dicts.push_back(std::move(z));
        }
  }
  std::string canon = "checkpoint=" + hex64(fnv1a64(read_file(o.checkpoint / "model.bin"))) + ";" +
                      describe(o.dictionaries) + describe(o.test) + "samples=" + std::to_string(o.isotropy_samples);
  const auto prov = provenance("analyze", canon, o.seed);
  std::filesystem::create_directories(o.out_dir);

  if (!dicts.empty()) {
    auto reports = similarity_suite(model, dicts, TableMode::kOriginal, o.seed, o.isotropy_samples,
                                    o.isotropy_include_reserved);
    if (model.config().hops > 0) {
      auto rep = similarity_suite(model, dicts, TableMode::kReparam, o.seed, o.isotropy_samples,
                                  o.isotropy_include_reserved);
      reports.insert(reports.end(), rep.begin(), rep.end());
    }
    for (const auto& r : reports)
      log << r.pair << " " << table_mode_name(r.mode) << ": similarity " << fixed(r.mean_similarity, 4) << " ("
          << fixed(r.isotropy, 4) << "), " << r.n_pairs << " pairs\n";
    write_file_atomic(o.out_dir / "similarity.csv", similarity_csv(reports, prov));
  }

  if (!o.test.empty()) {
    const auto test = load_corpora(o.test, log);
    std::ostringstream csv;
    csv << "# " << prov << "\ndirection,bleu,sentences\n";
    for (const auto& c : test.corpora()) {
      std::vector<std::vector<Index>> sources;
      std::vector<Sentence> refs, hyps;
      for (const auto& p : c.pairs) {
        sources.push_back(nmt::make_source(model.vocab(), p.src, c.tgt_lang, model.config().max_len));
        refs.push_back(p.tgt);
      }
      for (const auto& ids : model.greedy_decode(sources, model.config().max_len)) hyps.push_back(model.vocab().decode(ids));
      const double b = bleu(hyps, refs);
      log << c.src_lang << "-" << c.tgt_lang << ": BLEU " << fixed(b, 2) << " on " << c.size() << " sentences\n";
      csv << c.src_lang << "-" << c.tgt_lang << "," << fixed(b, 2) << "," << c.size() << "\n";
    }
    write_file_atomic(o.out_dir / "bleu.csv", csv.str());
  }
}

void cmd_bench(const BenchOptions& o, std::ostream& log) {
  const auto& c = o.config;
  std::string canon = c.model.to_ini() + "concepts=" + std::to_string(c.concepts) + ";pairs=" + std::to_string(c.pairs);
  const auto report = bench::run_bench(c);
  const auto csv = bench::bench_csv(report, provenance("bench", canon, c.seed));
  log << csv;
  for (const auto& w : report.wps)
    log << "hops " << w.hops << ": " << fixed(w.wps, 0) << " wps, time " << fixed(w.time_ratio, 2) << "\n";
  if (!o.out.empty()) write_file_atomic(o.out, csv);
}

void cmd_make_toy(const ToyOptions& o, std::ostream& log) {
  toy::ToyConfig tc;
  tc.concepts = o.concepts;
  tc.high_pairs = o.high_pairs;
  tc.low_pairs = o.low_pairs;
  tc.dev_pairs = o.dev_pairs;
  tc.seed = o.seed;
  const auto d = toy::make_toy(tc);
  std::filesystem::create_directories(o.out_dir);
  for (const auto& c : d.train.corpora()) save_bitext(c, o.out_dir / ("train." + c.src_lang + "-" + c.tgt_lang + ".tsv"));
  for (const auto& c : d.dev.corpora()) save_bitext(c, o.out_dir / ("dev." + c.src_lang + "-" + c.tgt_lang + ".tsv"));
  d.en_l1.save(o.out_dir / "dict.en-l1.tsv");
  d.en_l2.save(o.out_dir / "dict.en-l2.tsv");
  log << "wrote toy corpora (" << d.train.sizes()[0] << " en-l1, " << d.train.sizes()[1] << " en-l2 pairs) to "
      << o.out_dir.string() << "\n";
}

}  // namespace graphmerge::pipeline
