#include "graphmerge/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

#include "graphmerge/nmt/model.hpp"
#include "graphmerge/nmt/train.hpp"
#include "graphmerge/rng.hpp"
#include "graphmerge/runtime.hpp"
#include "graphmerge/toy.hpp"

namespace graphmerge::bench {
namespace {

using Clock = std::chrono::steady_clock;

struct Setup {
  toy::ToyData data;
  Vocabulary vocab;
  EquivalenceGraph graph;
  CorpusCollection directions;
  std::vector<std::vector<nmt::Example>> examples;
  std::vector<double> weights;
};

struct StepTimes {
  std::vector<double> seconds;
  std::vector<double> graph_seconds;
  std::size_t tokens = 0;
  double total() const {
    double s = 0;
    for (double v : seconds) s += v;
    return s;
  }
};

StepTimes time_steps(const Setup& s, nmt::ModelConfig cfg, std::size_t batch_size, const BenchConfig& bc) {
  cfg.batch_size = batch_size;
  std::optional<EquivalenceGraph> graph;
  if (cfg.hops > 0) graph = s.graph;
  nmt::TranslationModel model(cfg, s.vocab, std::move(graph), bc.seed);
  nmt::Adam adam(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  auto params = model.parameters();
  Rng dropout(derive_seed(bc.seed, "dropout"));
  const auto batch_seed = derive_seed(bc.seed, "bench.batches");

  StepTimes out;
  std::vector<nmt::Example> batch;
  for (std::size_t step = 1;; ++step) {
    const auto picks = sample_batch(s.directions, s.weights, batch_size, derive_seed(batch_seed, std::to_string(step)));
    batch.clear();
    for (const auto& p : picks) batch.push_back(s.examples[p.corpus][p.pair]);
    nmt::GraphTiming gt;
    const auto t0 = Clock::now();
    for (auto* p : params) p->zero_grad();
    const auto stats = model.forward_loss(batch, &dropout, true, &gt);
    adam.step(params, nmt::inverse_sqrt_lr(step, cfg.lr_peak, cfg.warmup_steps));
    const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
    if (step <= bc.warmup_steps) continue;
    out.seconds.push_back(dt);
    out.graph_seconds.push_back(gt.total());
    out.tokens += stats.src_tokens + stats.tokens;
    if (out.seconds.size() >= bc.min_steps && out.total() >= bc.min_seconds) break;
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

BenchReport run_bench(const BenchConfig& bc) {
  configure_allocator();
  if (std::find(bc.hops.begin(), bc.hops.end(), 0) == bc.hops.end())
    throw ValidationError("bench needs the baseline (hops 0) for normalization");
  if (bc.min_steps == 0) throw ValidationError("bench needs at least one measured step");

  toy::ToyConfig tc;
  tc.concepts = bc.concepts;
  tc.high_pairs = tc.low_pairs = bc.pairs;
  tc.dev_pairs = 1;
  tc.seed = bc.seed;
  Setup s;
  s.data = toy::make_toy(tc);
  s.vocab = Vocabulary::build(s.data.train);
  s.graph = build_equivalence_graph(s.data.train, s.data.gold, s.vocab);
  s.directions = s.data.train.with_reverse_directions();
  s.examples = nmt::encode_collection(s.directions, s.vocab, bc.model.max_len).examples;
  const auto sizes = s.directions.sizes();
  s.weights = temperature_weights(sizes, bc.model.temperature);

  BenchReport r;
  r.vocab_size = s.vocab.size();
  r.batch_size = bc.model.batch_size;
  double base_wps = 0.0;
  std::vector<std::size_t> order = bc.hops;
  std::sort(order.begin(), order.end());
  for (auto h : order) {
    auto cfg = bc.model;
    cfg.hops = h;
    const auto t = time_steps(s, cfg, bc.model.batch_size, bc);
    WpsRow row;
    row.hops = h;
    row.steps = t.seconds.size();
    row.seconds = t.total();
    row.wps = static_cast<double>(t.tokens) / row.seconds;
    if (h == 0) base_wps = row.wps;
    row.time_ratio = base_wps / row.wps;
    r.wps.push_back(row);
  }
  for (auto h : order) {
    if (h == 0) continue;
    for (auto b : bc.graph_batches) {
      auto cfg = bc.model;
      cfg.hops = h;
      const auto t = time_steps(s, cfg, b, bc);
      r.graph_path.push_back({h, b, 1000.0 * median(t.graph_seconds), t.seconds.size()});
    }
  }
  return r;
}

std::string bench_csv(const BenchReport& r, std::string_view provenance) {
  std::ostringstream o;
  if (!provenance.empty()) o << "# " << provenance << "\n";
  o << "# vocab=" << r.vocab_size << " batch=" << r.batch_size << "\n";
  o << "kind,hops,batch,wps,time_ratio,graph_ms,steps\n";
  for (const auto& w : r.wps)
    o << "wps," << w.hops << "," << r.batch_size << "," << fixed(w.wps, 1) << "," << fixed(w.time_ratio, 3) << ",," << w.steps
      << "\n";
  for (const auto& g : r.graph_path)
    o << "graph_path," << g.hops << "," << g.batch_size << ",,," << fixed(g.median_ms, 3) << "," << g.steps << "\n";
  return o.str();
}

}  // namespace graphmerge::bench
