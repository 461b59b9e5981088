#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "graphmerge/gnn.hpp"

namespace graphmerge::nmt {

/// Which table the decoder output projection reads.
enum class TieMode { kReparam, kOriginal, kNone };

TieMode parse_tie_mode(std::string_view name);
std::string_view tie_mode_name(TieMode mode);

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t enc_layers = 2;
  std::size_t dec_layers = 2;
  std::size_t heads = 2;
  std::size_t ffn_dim = 128;
  double dropout = 0.1;
  double label_smoothing = 0.1;
  TieMode tie_mode = TieMode::kReparam;
  std::size_t hops = 0;  ///< 0 = baseline transformer
  gnn::Activation graph_activation = gnn::Activation::kRelu;
  /// Graph layers start as identity and are not trained. Test hook.
  bool freeze_graph = false;

  double lr_peak = 4e-3;
  std::size_t warmup_steps = 200;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;

  std::size_t batch_size = 32;
  std::size_t max_steps = 1500;
  std::size_t checkpoint_interval = 250;
  std::size_t patience = 5;  ///< checkpoints without dev improvement
  double temperature = 2.0;
  std::size_t max_len = 64;

  /// "desk" (the defaults), "transformer-small", "transformer-base".
  static ModelConfig preset(std::string_view name);
  static std::vector<std::string> preset_names();

  /// Sets one key from its textual value; throws on unknown keys.
  void set(std::string_view key, std::string_view value);
  void validate() const;

  /// key=value lines, one per field, fixed order.
  std::string to_ini() const;
  /// Starts from the defaults; "preset=" (if present) must come first.
  static ModelConfig from_ini(std::string_view text);
  static ModelConfig load(const std::filesystem::path& path);

  std::uint64_t hash() const;
};

/// lr = peak * min(step / warmup, sqrt(warmup / step)), step counted from 1.
double inverse_sqrt_lr(std::size_t step, double peak, std::size_t warmup);

}  // namespace graphmerge::nmt
