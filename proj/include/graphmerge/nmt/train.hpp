#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "graphmerge/corpus.hpp"
#include "graphmerge/nmt/model.hpp"

namespace graphmerge::nmt {

/// Adam with decoupled per-parameter first/second moments.
class Adam {
 public:
  Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Updates every trainable parameter from its grad buffer.
  void step(const std::vector<Parameter*>& params, double lr);
  std::size_t steps() const { return step_; }

  TensorArchive state() const;
  void restore(const TensorArchive& archive);

 private:
  double beta1_, beta2_, eps_;
  std::size_t step_ = 0;
  std::vector<std::pair<std::string, std::pair<Matrix, Matrix>>> moments_;
};

/// Every direction of `collection` (reverse directions included), encoded.
struct EncodedCorpus {
  std::vector<std::string> directions;          ///< "src-tgt"
  std::vector<std::vector<Example>> examples;   ///< per direction
};
EncodedCorpus encode_collection(const CorpusCollection& directions, const Vocabulary& vocab, std::size_t max_len);

struct LogRow {
  std::size_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;  ///< mean since the previous row
  double dev_loss = 0.0;    ///< dev NLL per token
  double wps = 0.0;         ///< source + target tokens per second of step time
};

struct TrainResult {
  std::vector<LogRow> log;
  std::vector<double> step_losses;
  std::size_t steps = 0;
  std::size_t best_step = 0;
  double best_dev_loss = 0.0;
  bool early_stopped = false;
};

struct TrainOptions {
  /// Checkpoint directory; empty keeps everything in memory.
  std::filesystem::path out_dir;
  std::string provenance;
  /// Called after every log row.
  std::function<void(const LogRow&)> on_log;
  /// Restore the best checkpoint's parameters into the model at the end.
  bool restore_best = true;
};

/// Temperature-sampled batches over every direction of `train`; dev loss
/// every checkpoint_interval steps, early stopping after `patience`
/// checkpoints without improvement. A non-finite loss throws RuntimeError.
/// Writes, when out_dir is set: the best model (TranslationModel::save),
/// reparam.bin, optimizer.bin, rng.txt and train_log.csv.
TrainResult train(TranslationModel& model, const CorpusCollection& train, const CorpusCollection& dev,
                  std::uint64_t seed, const TrainOptions& options = {});

std::string format_log_csv(const std::vector<LogRow>& log, std::string_view provenance = {});

/// Exports a |V| x d table (the standalone embedding file).
void save_table(const Matrix& table, const std::filesystem::path& path, std::string_view provenance = {});
Matrix load_table(const std::filesystem::path& path);

}  // namespace graphmerge::nmt
