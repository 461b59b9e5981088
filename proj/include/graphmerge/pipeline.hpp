#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "graphmerge/aligner.hpp"
#include "graphmerge/bench.hpp"
#include "graphmerge/corpus.hpp"
#include "graphmerge/nmt/config.hpp"

namespace graphmerge::pipeline {

/// "SRC-TGT=PATH" on the command line.
struct CorpusSpec {
  std::string src;
  std::string tgt;
  std::filesystem::path path;

  static CorpusSpec parse(std::string_view text);
  std::string name() const { return src + "-" + tgt; }
};

/// Loads every corpus, warns about rejected lines on `log`.
CorpusCollection load_corpora(const std::vector<CorpusSpec>& specs, std::ostream& log);

/// "graphmerge <command> version=... config=<16 hex> seed=<n>"
std::string provenance(std::string_view command, std::string_view canonical_config, std::uint64_t seed);

struct AlignOptions {
  std::vector<CorpusSpec> corpora;
  std::filesystem::path out_dir;
  SymmetrizeStrategy strategy = SymmetrizeStrategy::kGrowDiagFinalAnd;
  int iterations = 5;
  /// Import mode: per corpus, Pharaoh files for both directions. The
  /// backward file is in target-source order.
  std::vector<std::filesystem::path> import_forward;
  std::vector<std::filesystem::path> import_backward;
};

/// Writes <out_dir>/<src>-<tgt>.{fwd,bwd,sym}. Everything is validated
/// before the first file is written.
void cmd_align(const AlignOptions& options, std::ostream& log);

struct GraphOptions {
  std::vector<CorpusSpec> corpora;
  /// Directory holding <src>-<tgt>.sym files (cmd_align output).
  std::filesystem::path alignment_dir;
  std::filesystem::path out_dir;
  std::string pivot = "en";
  bool export_tsv = false;
};

/// Writes vocab.txt and graph.bin (and graph.tsv); prints the audit.
void cmd_graph(const GraphOptions& options, std::ostream& log);

struct TrainOptions {
  std::vector<CorpusSpec> train;
  std::vector<CorpusSpec> dev;
  /// Vocabulary file; built from the training corpora when empty.
  std::filesystem::path vocab;
  /// Required when hops > 0.
  std::filesystem::path graph;
  std::filesystem::path out_dir;
  nmt::ModelConfig model;
  std::uint64_t seed = 1;
};

void cmd_train(const TrainOptions& options, std::ostream& log);

struct AnalyzeOptions {
  std::filesystem::path checkpoint;
  /// "A-B=PATH" dictionaries; English-centric ones also feed zero-shot
  /// induction when `zero_shot` is set.
  std::vector<CorpusSpec> dictionaries;
  bool zero_shot = true;
  std::string pivot = "en";
  std::vector<CorpusSpec> test;
  std::filesystem::path out_dir;
  std::size_t isotropy_samples = 50;
  bool isotropy_include_reserved = true;
  std::uint64_t seed = 1;
};

/// Writes similarity.csv (both table modes when the model has a graph)
/// and bleu.csv (one row per test direction).
void cmd_analyze(const AnalyzeOptions& options, std::ostream& log);

struct BenchOptions {
  bench::BenchConfig config;
  std::filesystem::path out;  ///< CSV; stdout only when empty
};

void cmd_bench(const BenchOptions& options, std::ostream& log);

struct ToyOptions {
  std::filesystem::path out_dir;
  std::size_t concepts = 300;
  std::size_t high_pairs = 3000;
  std::size_t low_pairs = 300;
  std::size_t dev_pairs = 200;
  std::uint64_t seed = 1;
};

/// Writes the synthetic corpora (train/dev TSV) and the lexicons.
void cmd_make_toy(const ToyOptions& options, std::ostream& log);

}  // namespace graphmerge::pipeline
