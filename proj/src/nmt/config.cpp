#include "graphmerge/nmt/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "graphmerge/binary_io.hpp"
#include "graphmerge/rng.hpp"

namespace graphmerge::nmt {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::size_t to_count(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) throw ValidationError("config key '" + std::string(key) + "': '" + std::string(v) + "' is not a count");
  return out;
}

double to_real(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(std::string(v), &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw ValidationError("config key '" + std::string(key) + "': '" + std::string(v) + "' is not a number");
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("config key '" + std::string(key) + "': '" + std::string(v) + "' is not a boolean");
}

std::string real_str(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

TieMode parse_tie_mode(std::string_view name) {
  if (name == "reparam") return TieMode::kReparam;
  if (name == "original") return TieMode::kOriginal;
  if (name == "none") return TieMode::kNone;
  throw ValidationError("unknown tie mode '" + std::string(name) + "' (expected reparam, original or none)");
}

std::string_view tie_mode_name(TieMode mode) {
  switch (mode) {
    case TieMode::kReparam: return "reparam";
    case TieMode::kOriginal: return "original";
    case TieMode::kNone: return "none";
  }
  return "?";
}

ModelConfig ModelConfig::preset(std::string_view name) {
  ModelConfig c;
  if (name == "desk") return c;
  if (name == "transformer-small" || name == "transformer-base") {
    c.d_model = 512;
    c.enc_layers = 6;
    c.dec_layers = 6;
    c.heads = name == "transformer-small" ? 4 : 8;
    c.ffn_dim = name == "transformer-small" ? 1024 : 2048;
    c.lr_peak = 5e-4;
    c.warmup_steps = 4000;
    c.batch_size = 128;
    c.max_steps = 300000;
    c.checkpoint_interval = 1000;
    c.patience = 20;
    c.max_len = 256;
    return c;
  }
  throw ValidationError("unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> ModelConfig::preset_names() { return {"desk", "transformer-small", "transformer-base"}; }

void ModelConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "d_model") d_model = to_count(key, value);
  else if (key == "enc_layers") enc_layers = to_count(key, value);
  else if (key == "dec_layers") dec_layers = to_count(key, value);
  else if (key == "heads") heads = to_count(key, value);
  else if (key == "ffn_dim") ffn_dim = to_count(key, value);
  else if (key == "dropout") dropout = to_real(key, value);
  else if (key == "label_smoothing") label_smoothing = to_real(key, value);
  else if (key == "tie_mode") tie_mode = parse_tie_mode(value);
  else if (key == "hops") hops = to_count(key, value);
  else if (key == "graph_activation") graph_activation = gnn::parse_activation(value);
  else if (key == "freeze_graph") freeze_graph = to_bool(key, value);
  else if (key == "lr_peak") lr_peak = to_real(key, value);
  else if (key == "warmup_steps") warmup_steps = to_count(key, value);
  else if (key == "adam_beta1") adam_beta1 = to_real(key, value);
  else if (key == "adam_beta2") adam_beta2 = to_real(key, value);
  else if (key == "adam_eps") adam_eps = to_real(key, value);
  else if (key == "batch_size") batch_size = to_count(key, value);
  else if (key == "max_steps") max_steps = to_count(key, value);
  else if (key == "checkpoint_interval") checkpoint_interval = to_count(key, value);
  else if (key == "patience") patience = to_count(key, value);
  else if (key == "temperature") temperature = to_real(key, value);
  else if (key == "max_len") max_len = to_count(key, value);
  else throw ValidationError("unknown config key '" + std::string(key) + "'");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("invalid model config: " + m); };
  if (d_model == 0 || heads == 0 || d_model % heads != 0) fail("d_model must be a positive multiple of heads");
  if (enc_layers == 0 || dec_layers == 0) fail("encoder and decoder need at least one layer");
  if (ffn_dim == 0) fail("ffn_dim must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0,1)");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) fail("label_smoothing must be in [0,1)");
  if (!(lr_peak > 0.0) || !std::isfinite(lr_peak)) fail("lr_peak must be positive");
  if (warmup_steps == 0) fail("warmup_steps must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail("Adam betas must be in [0,1)");
  if (!(adam_eps > 0.0)) fail("adam_eps must be positive");
  if (batch_size == 0 || checkpoint_interval == 0 || max_len < 2) fail("batch_size, checkpoint_interval and max_len must be positive");
  if (!(temperature > 0.0)) fail("temperature must be positive");
  if (freeze_graph && hops == 0) fail("freeze_graph needs hops > 0");
}

std::string ModelConfig::to_ini() const {
  std::ostringstream o;
  o << "d_model=" << d_model << "\n"
    << "enc_layers=" << enc_layers << "\n"
    << "dec_layers=" << dec_layers << "\n"
    << "heads=" << heads << "\n"
    << "ffn_dim=" << ffn_dim << "\n"
    << "dropout=" << real_str(dropout) << "\n"
    << "label_smoothing=" << real_str(label_smoothing) << "\n"
    << "tie_mode=" << tie_mode_name(tie_mode) << "\n"
    << "hops=" << hops << "\n"
    << "graph_activation=" << gnn::activation_name(graph_activation) << "\n"
    << "freeze_graph=" << (freeze_graph ? "true" : "false") << "\n"
    << "lr_peak=" << real_str(lr_peak) << "\n"
    << "warmup_steps=" << warmup_steps << "\n"
    << "adam_beta1=" << real_str(adam_beta1) << "\n"
    << "adam_beta2=" << real_str(adam_beta2) << "\n"
    << "adam_eps=" << real_str(adam_eps) << "\n"
    << "batch_size=" << batch_size << "\n"
    << "max_steps=" << max_steps << "\n"
    << "checkpoint_interval=" << checkpoint_interval << "\n"
    << "patience=" << patience << "\n"
    << "temperature=" << real_str(temperature) << "\n"
    << "max_len=" << max_len << "\n";
  return o.str();
}

ModelConfig ModelConfig::from_ini(std::string_view text) {
  ModelConfig c;
  bool first = true;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#' || line.front() == ';' || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ValidationError("config line " + std::to_string(line_no) + ": expected key=value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "preset") {
      if (!first) throw ValidationError("config line " + std::to_string(line_no) + ": preset must come before other keys");
      c = preset(value);
    } else {
      c.set(key, value);
    }
    first = false;
  }
  c.validate();
  return c;
}

ModelConfig ModelConfig::load(const std::filesystem::path& path) { return from_ini(read_file(path)); }

std::uint64_t ModelConfig::hash() const { return fnv1a64(to_ini()); }

double inverse_sqrt_lr(std::size_t step, double peak, std::size_t warmup) {
  if (step == 0) return 0.0;
  const double s = static_cast<double>(step), w = static_cast<double>(warmup);
  return peak * std::min(s / w, std::sqrt(w / s));
}

}  // namespace graphmerge::nmt
