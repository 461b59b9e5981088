#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "graphmerge/common.hpp"
#include "graphmerge/pipeline.hpp"

namespace gm = graphmerge;
namespace pl = graphmerge::pipeline;

namespace {

std::vector<pl::CorpusSpec> specs(const std::vector<std::string>& args) {
  std::vector<pl::CorpusSpec> out;
  for (const auto& a : args) out.push_back(pl::CorpusSpec::parse(a));
  return out;
}

void require_exists(const std::filesystem::path& p, const char* what) {
  if (!p.empty() && !std::filesystem::exists(p)) throw gm::ValidationError(std::string(what) + " not found: " + p.string());
}

/// Model settings in increasing priority: preset or model config file,
/// then --set pairs, then the dedicated flags.
struct ModelFlags {
  std::string preset = "desk";
  std::string model_config;
  std::vector<std::string> sets;
  std::optional<std::size_t> hops;
  std::optional<std::string> tie_mode;
  std::optional<double> temperature;
  std::optional<std::size_t> max_steps;
  std::optional<std::size_t> batch_size;

  void add(CLI::App* app) {
    app->add_option("--preset", preset, "Model preset: desk, transformer-small, transformer-base")->capture_default_str();
    app->add_option("--model-config", model_config, "key=value model config file (replaces --preset)");
    app->add_option("--set", sets, "Override one model key, key=value (repeatable)");
    app->add_option("--hops", hops, "Graph layers; 0 trains the baseline");
    app->add_option("--tie-mode", tie_mode, "Output projection table: reparam, original, none");
    app->add_option("--temperature", temperature, "Language-pair sampling temperature");
    app->add_option("--max-steps", max_steps, "Training steps");
    app->add_option("--batch-size", batch_size, "Sentence pairs per step");
  }

  gm::nmt::ModelConfig resolve(bool preset_given) const {
    if (!model_config.empty() && preset_given) throw gm::ValidationError("--preset and --model-config are exclusive");
    require_exists(model_config, "model config");
    auto c = model_config.empty() ? gm::nmt::ModelConfig::preset(preset) : gm::nmt::ModelConfig::load(model_config);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw gm::ValidationError("--set expects key=value, got '" + s + "'");
      c.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (hops) c.hops = *hops;
    if (tie_mode) c.tie_mode = gm::nmt::parse_tie_mode(*tie_mode);
    if (temperature) c.temperature = *temperature;
    if (max_steps) c.max_steps = *max_steps;
    if (batch_size) c.batch_size = *batch_size;
    c.validate();
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-merged multilingual embeddings for NMT"};
  app.set_version_flag("--version", std::string(gm::kVersion));
  app.set_config("--config", "", "INI/TOML file with option defaults; command-line flags win");
  app.require_subcommand(1);

  // align
  pl::AlignOptions align;
  std::vector<std::string> align_corpora;
  std::string align_strategy = "gdfa";
  auto* a = app.add_subcommand("align", "Word-align bitexts (built-in IBM Model 1 or imported Pharaoh files)");
  a->add_option("--corpus", align_corpora, "SRC-TGT=PATH tab-separated bitext (repeatable)")->required();
  a->add_option("--out", align.out_dir, "Output directory")->required();
  a->add_option("--strategy", align_strategy, "intersect, union or gdfa")->capture_default_str();
  a->add_option("--iterations", align.iterations, "EM iterations")->capture_default_str();
  a->add_option("--import-forward", align.import_forward, "Pharaoh file per corpus, source-target order");
  a->add_option("--import-backward", align.import_backward, "Pharaoh file per corpus, target-source order");

  // graph
  pl::GraphOptions graph;
  std::vector<std::string> graph_corpora;
  auto* g = app.add_subcommand("graph", "Build the multilingual equivalence graph");
  g->add_option("--corpus", graph_corpora, "SRC-TGT=PATH, same list as for align")->required();
  g->add_option("--alignments", graph.alignment_dir, "Directory written by align")->required();
  g->add_option("--out", graph.out_dir, "Output directory")->required();
  g->add_option("--pivot", graph.pivot, "Pivot language for the audit")->capture_default_str();
  g->add_flag("--tsv", graph.export_tsv, "Also write graph.tsv");

  // train
  pl::TrainOptions train;
  std::vector<std::string> train_corpora, dev_corpora;
  ModelFlags train_model;
  auto* t = app.add_subcommand("train", "Train a baseline or graph-merged translation model");
  t->add_option("--train", train_corpora, "SRC-TGT=PATH training bitext (repeatable)")->required();
  t->add_option("--dev", dev_corpora, "SRC-TGT=PATH development bitext (repeatable)")->required();
  t->add_option("--vocab", train.vocab, "vocab.txt from graph (required with --graph)");
  t->add_option("--graph", train.graph, "graph.bin from graph");
  t->add_option("--out", train.out_dir, "Checkpoint directory")->required();
  t->add_option("--seed", train.seed, "Base seed")->capture_default_str();
  train_model.add(t);

  // analyze
  pl::AnalyzeOptions analyze;
  std::vector<std::string> dicts, tests;
  bool no_zero_shot = false, exclude_reserved = false;
  auto* an = app.add_subcommand("analyze", "Embedding similarity, isotropy and BLEU reports");
  an->add_option("--checkpoint", analyze.checkpoint, "Checkpoint directory")->required();
  an->add_option("--dict", dicts, "A-B=PATH bilingual dictionary TSV (repeatable)");
  an->add_option("--test", tests, "SRC-TGT=PATH held-out bitext for BLEU (repeatable)");
  an->add_option("--out", analyze.out_dir, "Report directory")->required();
  an->add_option("--pivot", analyze.pivot, "Language joined on for zero-shot dictionaries")->capture_default_str();
  an->add_flag("--no-zero-shot", no_zero_shot, "Skip zero-shot dictionary induction");
  an->add_option("--isotropy-samples", analyze.isotropy_samples, "Random rows per word")->capture_default_str();
  an->add_flag("--isotropy-exclude-reserved", exclude_reserved, "Sample isotropy rows from ordinary tokens only");
  an->add_option("--seed", analyze.seed, "Base seed")->capture_default_str();

  // bench
  pl::BenchOptions bench;
  ModelFlags bench_model;
  auto* b = app.add_subcommand("bench", "Training throughput of baseline vs graph-merged models");
  b->add_option("--out", bench.out, "CSV report path");
  b->add_option("--concepts", bench.config.concepts, "Synthetic concepts (vocabulary is about 3x)")->capture_default_str();
  b->add_option("--pairs", bench.config.pairs, "Sentence pairs per bitext")->capture_default_str();
  b->add_option("--bench-hops", bench.config.hops, "Hop counts to time; must include 0")->capture_default_str();
  b->add_option("--graph-batches", bench.config.graph_batches, "Batch sizes for graph-path timing")->capture_default_str();
  b->add_option("--warmup", bench.config.warmup_steps, "Untimed steps per run")->capture_default_str();
  b->add_option("--min-steps", bench.config.min_steps, "Minimum timed steps per run")->capture_default_str();
  b->add_option("--min-seconds", bench.config.min_seconds, "Minimum timed seconds per run")->capture_default_str();
  b->add_option("--seed", bench.config.seed, "Base seed")->capture_default_str();
  bench_model.add(b);

  // make-toy
  pl::ToyOptions toy;
  auto* mt = app.add_subcommand("make-toy", "Write the synthetic three-language corpus");
  mt->add_option("--out", toy.out_dir, "Output directory")->required();
  mt->add_option("--concepts", toy.concepts)->capture_default_str();
  mt->add_option("--high-pairs", toy.high_pairs, "en-l1 training pairs")->capture_default_str();
  mt->add_option("--low-pairs", toy.low_pairs, "en-l2 training pairs")->capture_default_str();
  mt->add_option("--dev-pairs", toy.dev_pairs, "Development pairs per bitext")->capture_default_str();
  mt->add_option("--seed", toy.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*a) {
      align.corpora = specs(align_corpora);
      align.strategy = gm::parse_strategy(align_strategy);
      for (const auto& p : align.import_forward) require_exists(p, "alignment file");
      for (const auto& p : align.import_backward) require_exists(p, "alignment file");
      pl::cmd_align(align, std::cout);
    } else if (*g) {
      graph.corpora = specs(graph_corpora);
      require_exists(graph.alignment_dir, "alignment directory");
      pl::cmd_graph(graph, std::cout);
    } else if (*t) {
      train.train = specs(train_corpora);
      train.dev = specs(dev_corpora);
      train.model = train_model.resolve(t->count("--preset") > 0);
      require_exists(train.vocab, "vocabulary");
      require_exists(train.graph, "graph");
      if (!train.graph.empty() && train.vocab.empty())
        throw gm::ValidationError("--graph needs the --vocab it was built with");
      pl::cmd_train(train, std::cout);
    } else if (*an) {
      analyze.dictionaries = specs(dicts);
      analyze.test = specs(tests);
      analyze.zero_shot = !no_zero_shot;
      analyze.isotropy_include_reserved = !exclude_reserved;
      require_exists(analyze.checkpoint, "checkpoint");
      for (const auto& d : analyze.dictionaries) require_exists(d.path, "dictionary");
      pl::cmd_analyze(analyze, std::cout);
    } else if (*b) {
      bench.config.model = bench_model.resolve(b->count("--preset") > 0);
      pl::cmd_bench(bench, std::cout);
    } else if (*mt) {
      pl::cmd_make_toy(toy, std::cout);
    }
  } catch (const gm::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
