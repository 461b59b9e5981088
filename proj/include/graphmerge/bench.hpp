#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "graphmerge/nmt/config.hpp"

namespace graphmerge::bench {

struct BenchConfig {
  /// Synthetic toy languages; 2700 concepts give a vocabulary of ~8.1K.
  std::size_t concepts = 2700;
  std::size_t pairs = 2000;  ///< per bitext
  nmt::ModelConfig model;
  std::vector<std::size_t> hops{0, 1, 2};
  std::vector<std::size_t> graph_batches{32, 256};
  std::size_t warmup_steps = 3;  ///< untimed
  std::size_t min_steps = 10;
  /// Measurement keeps stepping until this much time has been timed.
  double min_seconds = 2.0;
  std::uint64_t seed = 1;
};

struct WpsRow {
  std::size_t hops = 0;
  double wps = 0.0;         ///< source + target tokens per second
  double time_ratio = 0.0;  ///< baseline wps / this wps; baseline = 1.00
  std::size_t steps = 0;
  double seconds = 0.0;
};

struct GraphPathRow {
  std::size_t hops = 0;
  std::size_t batch_size = 0;
  double median_ms = 0.0;  ///< graph forward + backward per training step
  std::size_t steps = 0;
};

struct BenchReport {
  std::size_t vocab_size = 0;
  std::size_t batch_size = 0;
  std::vector<WpsRow> wps;
  std::vector<GraphPathRow> graph_path;
};

/// Times real training steps (forward, backward, Adam) of a baseline and
/// of each hop count on the same data. The baseline must be in `hops`.
BenchReport run_bench(const BenchConfig& config);

std::string bench_csv(const BenchReport& report, std::string_view provenance = {});

}  // namespace graphmerge::bench
