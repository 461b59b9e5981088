#include "graphmerge/toy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "graphmerge/nmt/train.hpp"
#include "graphmerge/rng.hpp"

namespace graphmerge::toy {

std::string word(std::string_view lang, std::size_t concept_id) {
  if (lang == "en") return "e" + std::to_string(concept_id);
  if (lang == "l1") return "p" + std::to_string(concept_id);
  if (lang == "l2") return "q" + std::to_string(concept_id);
  throw ValidationError("toy data has no language '" + std::string(lang) + "'");
}

namespace {

class ConceptSampler {
 public:
  ConceptSampler(std::size_t n, double zipf) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += zipf == 0.0 ? 1.0 : std::pow(static_cast<double>(k + 1), -zipf);
      cumulative_.push_back(acc);
    }
  }
  std::size_t draw(Rng& rng) const {
    const double u = rng.uniform() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

BitextCorpus generate(std::string_view other, std::size_t n, const ToyConfig& c, const ConceptSampler& sampler, Rng& rng) {
  BitextCorpus out{"en", std::string(other), {}, {}};
  for (std::size_t s = 0; s < n; ++s) {
    const auto len = c.min_len + rng.below(c.max_len - c.min_len + 1);
    SentencePair p;
    for (std::size_t i = 0; i < len; ++i) {
      const auto k = sampler.draw(rng);
      p.src.push_back(word("en", k));
      p.tgt.push_back(word(other, k));
    }
    std::reverse(p.tgt.begin(), p.tgt.end());
    out.pairs.push_back(std::move(p));
  }
  return out;
}

/// Pooled token accuracy over both directions of the bitext en-`lang`.
double direction_accuracy(const nmt::TranslationModel& model, const BitextCorpus& dev) {
  CorpusCollection c;
  c.add(dev);
  const auto enc = nmt::encode_collection(c.with_reverse_directions(), model.vocab(), model.config().max_len);
  nmt::BatchStats total;
  for (const auto& exs : enc.examples) total += model.evaluate(exs, 64);
  return total.accuracy();
}

}  // namespace

ToyData make_toy(const ToyConfig& c) {
  if (c.concepts == 0 || c.min_len == 0 || c.max_len < c.min_len) throw ValidationError("invalid toy configuration");
  if (c.high_pairs == 0 || c.low_pairs == 0 || c.dev_pairs == 0) throw ValidationError("toy corpora must be non-empty");
  const ConceptSampler sampler(c.concepts, c.zipf);
  Rng rng(derive_seed(c.seed, "toy.data"));
  ToyData d;
  d.train.add(generate("l1", c.high_pairs, c, sampler, rng));
  d.train.add(generate("l2", c.low_pairs, c, sampler, rng));
  d.dev.add(generate("l1", c.dev_pairs, c, sampler, rng));
  d.dev.add(generate("l2", c.dev_pairs, c, sampler, rng));
  for (const auto& corpus : d.train.corpora()) {
    auto& g = d.gold.emplace_back();
    for (const auto& p : corpus.pairs) {
      SentenceAlignment a;
      const auto n = static_cast<std::uint32_t>(p.src.size());
      for (std::uint32_t i = 0; i < n; ++i) a.emplace(i, n - 1 - i);
      g.push_back(std::move(a));
    }
  }
  d.en_l1 = {"en", "l1", {}};
  d.en_l2 = {"en", "l2", {}};
  for (std::size_t k = 0; k < c.concepts; ++k) {
    d.en_l1.add(word("en", k), word("l1", k));
    d.en_l2.add(word("en", k), word("l2", k));
  }
  return d;
}

PreparedToy prepare_toy(const ToyConfig& config, int align_iterations, SymmetrizeStrategy strategy) {
  auto data = make_toy(config);
  auto vocab = Vocabulary::build(data.train);
  std::vector<std::vector<SentenceAlignment>> alignments;
  for (const auto& corpus : data.train.corpora()) {
    const auto dir = align_corpus(corpus, vocab, align_iterations);
    auto& sym = alignments.emplace_back();
    for (std::size_t s = 0; s < corpus.size(); ++s) sym.push_back(symmetrize(dir.forward[s], dir.backward[s], strategy));
  }
  auto graph = build_equivalence_graph(data.train, alignments, vocab);
  return {std::move(data), std::move(vocab), std::move(graph)};
}

RunResult run_toy(const PreparedToy& toy, nmt::ModelConfig config, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult r;
  r.hops = config.hops;
  r.tie = config.tie_mode;
  r.seed = seed;
  std::optional<EquivalenceGraph> graph;
  if (config.hops > 0) graph = toy.graph;
  nmt::TranslationModel model(std::move(config), toy.vocab, std::move(graph), seed);
  nmt::TrainOptions opts;
  const auto res = nmt::train(model, toy.data.train, toy.data.dev, seed, opts);
  r.steps = res.steps;

  const auto l1 = toy.data.dev.find("en", "l1");
  const auto l2 = toy.data.dev.find("en", "l2");
  r.low_accuracy = direction_accuracy(model, toy.data.dev[*l2]);
  r.high_accuracy = direction_accuracy(model, toy.data.dev[*l1]);

  const auto zero_shot = induce_zero_shot_dict(toy.data.en_l1, toy.data.en_l2);
  const Matrix& x = model.original_table();
  r.sim_original = pair_similarity(x, toy.vocab, toy.data.en_l2);
  r.zs_original = pair_similarity(x, toy.vocab, zero_shot);
  if (model.config().hops > 0) {
    const Matrix h = model.reparam_table();
    r.sim_reparam = pair_similarity(h, toy.vocab, toy.data.en_l2);
    r.zs_reparam = pair_similarity(h, toy.vocab, zero_shot);
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace graphmerge::toy
