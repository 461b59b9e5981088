#include "graphmerge/nmt/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "graphmerge/binary_io.hpp"
#include "graphmerge/rng.hpp"

namespace graphmerge::nmt {
namespace {

void append_attention(std::vector<ParameterShape>& out, const std::string& p, std::size_t d) {
  for (const char* w : {"q", "k", "v", "o"}) {
    out.push_back({p + ".w" + w, d, d});
    out.push_back({p + ".b" + w, 1, d});
  }
}

void append_norm(std::vector<ParameterShape>& out, const std::string& p, std::size_t d) {
  out.push_back({p + ".g", 1, d});
  out.push_back({p + ".b", 1, d});
}

void append_ffn(std::vector<ParameterShape>& out, const std::string& p, std::size_t d, std::size_t f) {
  out.push_back({p + ".w1", d, f});
  out.push_back({p + ".b1", 1, f});
  out.push_back({p + ".w2", f, d});
  out.push_back({p + ".b2", 1, d});
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

Matrix sinusoid_table(std::size_t rows, std::size_t d) {
  Matrix pe(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
  for (std::size_t pos = 0; pos < rows; ++pos)
    for (std::size_t i = 0; i < d; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d));
      const double a = static_cast<double>(pos) * freq;
      pe(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(i)) = i % 2 == 0 ? std::sin(a) : std::cos(a);
    }
  return pe;
}

void fill_uniform(Matrix& m, double bound, Rng& rng) {
  double* p = m.data();
  for (Eigen::Index k = 0; k < m.size(); ++k) p[k] = rng.uniform(-bound, bound);
}

}  // namespace

BatchStats& BatchStats::operator+=(const BatchStats& o) {
  const double total = static_cast<double>(tokens + o.tokens);
  if (total > 0) loss = (loss * static_cast<double>(tokens) + o.loss * static_cast<double>(o.tokens)) / total;
  nll_sum += o.nll_sum;
  tokens += o.tokens;
  correct += o.correct;
  src_tokens += o.src_tokens;
  return *this;
}

std::vector<Index> make_source(const Vocabulary& vocab, const Sentence& src, std::string_view tgt_lang,
                               std::size_t max_len) {
  std::vector<Index> out{vocab.tag(tgt_lang)};
  const std::size_t keep = std::min(src.size(), max_len >= 2 ? max_len - 2 : 0);
  for (std::size_t i = 0; i < keep; ++i) out.push_back(vocab.lookup(src[i]));
  out.push_back(Vocabulary::kEos);
  return out;
}

Example make_example(const Vocabulary& vocab, const Sentence& src, const Sentence& tgt, std::string_view tgt_lang,
                     std::size_t max_len) {
  Example ex;
  ex.src = make_source(vocab, src, tgt_lang, max_len);
  const std::size_t keep = std::min(tgt.size(), max_len >= 1 ? max_len - 1 : 0);
  ex.dec_in.push_back(Vocabulary::kBos);
  for (std::size_t i = 0; i < keep; ++i) {
    const Index id = vocab.lookup(tgt[i]);
    ex.dec_in.push_back(id);
    ex.dec_out.push_back(id);
  }
  ex.dec_out.push_back(Vocabulary::kEos);
  return ex;
}

std::vector<ParameterShape> parameter_shapes(const ModelConfig& c, std::size_t vocab_size) {
  const std::size_t d = c.d_model;
  std::vector<ParameterShape> out;
  out.push_back({"embed", vocab_size, d});
  for (std::size_t t = 0; t < c.hops; ++t) {
    const std::string p = "graph.layer" + std::to_string(t);
    out.push_back({p + ".w_self", d, d});
    out.push_back({p + ".w_neighbor", d, d});
    out.push_back({p + ".bias", 1, d});
  }
  for (std::size_t l = 0; l < c.enc_layers; ++l) {
    const std::string p = "enc" + std::to_string(l);
    append_norm(out, p + ".ln1", d);
    append_attention(out, p + ".self", d);
    append_norm(out, p + ".ln2", d);
    append_ffn(out, p + ".ffn", d, c.ffn_dim);
  }
  append_norm(out, "enc.ln", d);
  for (std::size_t l = 0; l < c.dec_layers; ++l) {
    const std::string p = "dec" + std::to_string(l);
    append_norm(out, p + ".ln1", d);
    append_attention(out, p + ".self", d);
    append_norm(out, p + ".ln2", d);
    append_attention(out, p + ".cross", d);
    append_norm(out, p + ".ln3", d);
    append_ffn(out, p + ".ffn", d, c.ffn_dim);
  }
  append_norm(out, "dec.ln", d);
  if (c.tie_mode == TieMode::kNone) out.push_back({"output", vocab_size, d});
  return out;
}

ParameterCount count_parameters(const ModelConfig& c, std::size_t vocab_size) {
  ParameterCount n;
  for (const auto& s : parameter_shapes(c, vocab_size)) {
    const bool graph = starts_with(s.name, "graph.");
    if (graph && c.freeze_graph) continue;
    n.total += s.rows * s.cols;
    if (graph) n.graph += s.rows * s.cols;
  }
  return n;
}

TranslationModel::TranslationModel(ModelConfig config, Vocabulary vocab, std::optional<EquivalenceGraph> graph,
                                   std::uint64_t seed)
    : config_(std::move(config)), vocab_(std::move(vocab)), graph_(std::move(graph)) {
  config_.validate();
  if (vocab_.size() <= Vocabulary::kNumSpecials) throw ValidationError("vocabulary has no tokens");
  if (config_.hops > 0) {
    if (!graph_) throw ValidationError("hops=" + std::to_string(config_.hops) + " needs an equivalence graph");
    if (graph_->size() != vocab_.size())
      throw ValidationError("graph has " + std::to_string(graph_->size()) + " rows but the vocabulary has " +
                            std::to_string(vocab_.size()) + " tokens");
  }
  positions_ = sinusoid_table(config_.max_len + 1, config_.d_model);
  allocate(seed);
}

void TranslationModel::allocate(std::uint64_t seed) {
  seed_ = seed;
  Rng embed_rng(derive_seed(seed, "model.embedding"));
  Rng init_rng(derive_seed(seed, "model.init"));
  Rng output_rng(derive_seed(seed, "model.output"));
  const double embed_bound = std::sqrt(3.0 / static_cast<double>(config_.d_model));

  gnn::GraphMergeStack stack;
  if (config_.hops > 0)
    stack = config_.freeze_graph ? gnn::GraphMergeStack::identity(config_.hops, config_.d_model)
                                 : gnn::GraphMergeStack::random(config_.hops, config_.d_model,
                                                                derive_seed(seed, "model.graph"), config_.graph_activation);

  params_.clear();
  for (const auto& s : parameter_shapes(config_, vocab_.size())) {
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols));
    const auto& n = s.name;
    bool trainable = true;
    if (n == "embed") {
      fill_uniform(m, embed_bound, embed_rng);
    } else if (n == "output") {
      fill_uniform(m, embed_bound, output_rng);
    } else if (starts_with(n, "graph.layer")) {
      const auto t = static_cast<std::size_t>(std::stoul(n.substr(11)));
      const auto& layer = stack.layers[t];
      if (n.ends_with(".w_self")) m = layer.w_self;
      else if (n.ends_with(".w_neighbor")) m = layer.w_neighbor;
      else m = layer.bias;
      trainable = !config_.freeze_graph;
    } else if (n.ends_with(".g")) {
      m.setOnes();
    } else if (s.rows > 1) {
      fill_uniform(m, std::sqrt(6.0 / static_cast<double>(s.rows + s.cols)), init_rng);
    }
    auto p = std::make_unique<Parameter>(n, std::move(m));
    p->trainable = trainable;
    params_.push_back(std::move(p));
  }
}

Parameter* TranslationModel::find(std::string_view name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Parameter* TranslationModel::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

std::vector<Parameter*> TranslationModel::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> TranslationModel::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

Parameter& TranslationModel::parameter(std::string_view name) {
  if (auto* p = find(name)) return *p;
  throw ValidationError("no parameter named '" + std::string(name) + "'");
}

const Parameter& TranslationModel::parameter(std::string_view name) const {
  if (const auto* p = find(name)) return *p;
  throw ValidationError("no parameter named '" + std::string(name) + "'");
}

bool TranslationModel::has_parameter(std::string_view name) const { return find(name) != nullptr; }

ParameterCount TranslationModel::parameter_count() const {
  ParameterCount n;
  for (const auto& p : params_) {
    if (!p->trainable) continue;
    n.total += p->size();
    if (starts_with(p->name, "graph.")) n.graph += p->size();
  }
  return n;
}

void TranslationModel::set_tie_mode(TieMode mode) {
  if (mode == config_.tie_mode) return;
  const bool had_output = config_.tie_mode == TieMode::kNone;
  config_.tie_mode = mode;
  if (had_output) {
    std::erase_if(params_, [](const auto& p) { return p->name == "output"; });
  } else if (mode == TieMode::kNone) {
    const auto& x = parameter("embed").value;
    Matrix m(x.rows(), x.cols());
    Rng rng(derive_seed(seed_, "model.output"));
    fill_uniform(m, std::sqrt(3.0 / static_cast<double>(config_.d_model)), rng);
    params_.push_back(std::make_unique<Parameter>("output", std::move(m)));
  }
}

gnn::GraphMergeStack TranslationModel::graph_stack() const {
  gnn::GraphMergeStack s;
  const auto act = config_.freeze_graph ? gnn::Activation::kIdentity : config_.graph_activation;
  for (std::size_t t = 0; t < config_.hops; ++t) {
    const std::string p = "graph.layer" + std::to_string(t);
    s.layers.push_back({parameter(p + ".w_self").value, parameter(p + ".w_neighbor").value,
                        parameter(p + ".bias").value.row(0), act});
  }
  return s;
}

void TranslationModel::set_graph_stack(const gnn::GraphMergeStack& stack) {
  if (stack.hops() != config_.hops || (stack.hops() > 0 && stack.dim() != config_.d_model))
    throw ValidationError("graph stack shape does not match the model");
  for (std::size_t t = 0; t < stack.hops(); ++t) {
    const std::string p = "graph.layer" + std::to_string(t);
    parameter(p + ".w_self").value = stack.layers[t].w_self;
    parameter(p + ".w_neighbor").value = stack.layers[t].w_neighbor;
    parameter(p + ".bias").value = stack.layers[t].bias;
  }
}

const Matrix& TranslationModel::original_table() const { return parameter("embed").value; }

Matrix TranslationModel::reparam_table() const {
  if (config_.hops == 0) throw ValidationError("the baseline model has no re-parameterized table");
  return gnn::stack_forward(graph_->matrix(), original_table(), graph_stack());
}

Matrix TranslationModel::input_table() const { return config_.hops > 0 ? reparam_table() : original_table(); }

struct TranslationModel::Pass {
  Tape& t;
  const TranslationModel& m;
  Rng* rng;
  GraphTiming* timing = nullptr;

  using Clock = std::chrono::steady_clock;

  /// Identity node whose backward runs `hook` before passing the gradient on.
  Var marker(Var a, std::function<void()> hook) {
    return t.push(t.value(a), t.requires_grad(a), [a, hook = std::move(hook)](Tape& t, Var self) {
      hook();
      t.grad(a) += t.grad(self);
    });
  }

  Var P(const std::string& name) { return t.param(const_cast<Parameter&>(m.parameter(name))); }
  Var drop(Var x) { return rng ? dropout(t, x, m.config_.dropout, *rng) : x; }
  Var norm(Var x, const std::string& p) { return layer_norm(t, x, P(p + ".g"), P(p + ".b")); }

  /// Returns (X, table read by lookups).
  std::pair<Var, Var> tables() {
    const Var x = P("embed");
    Var h = x;
    const bool timed = timing && m.config_.hops > 0;
    auto backward_start = std::make_shared<Clock::time_point>();
    if (timed) {
      h = marker(x, [tm = timing, backward_start] {
        tm->backward_seconds += std::chrono::duration<double>(Clock::now() - *backward_start).count();
      });
    }
    const auto forward_start = Clock::now();
    const auto act = m.config_.freeze_graph ? gnn::Activation::kIdentity : m.config_.graph_activation;
    for (std::size_t l = 0; l < m.config_.hops; ++l) {
      const std::string p = "graph.layer" + std::to_string(l);
      const Var agg = sparse_matmul(t, m.graph_->matrix(), h);
      const Var z = add(t, linear(t, h, P(p + ".w_self"), P(p + ".bias")), matmul(t, agg, P(p + ".w_neighbor")));
      h = act == gnn::Activation::kRelu ? relu(t, z) : z;
    }
    if (timed) {
      timing->forward_seconds += std::chrono::duration<double>(Clock::now() - forward_start).count();
      h = marker(h, [backward_start] { *backward_start = Clock::now(); });
    }
    return {x, h};
  }

  Var output_table(Var x, Var h) {
    switch (m.config_.tie_mode) {
      case TieMode::kReparam: return h;
      case TieMode::kOriginal: return x;
      case TieMode::kNone: return P("output");
    }
    return h;
  }

  Var embed(Var table, const std::vector<Index>& ids, const SequenceLayout& layout) {
    Matrix pos(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(m.config_.d_model));
    for (std::size_t b = 0; b < layout.count(); ++b)
      for (std::size_t i = 0; i < layout.lengths[b]; ++i)
        pos.row(static_cast<Eigen::Index>(layout.offsets[b] + i)) = m.positions_.row(static_cast<Eigen::Index>(i));
    const Var e = scale(t, gather_rows(t, table, ids), std::sqrt(static_cast<double>(m.config_.d_model)));
    return drop(add_constant(t, e, pos));
  }

  Var attend(Var xq, Var xkv, const std::string& p, const SequenceLayout& ql, const SequenceLayout& kl, bool causal) {
    const Var q = linear(t, xq, P(p + ".wq"), P(p + ".bq"));
    const Var k = linear(t, xkv, P(p + ".wk"), P(p + ".bk"));
    const Var v = linear(t, xkv, P(p + ".wv"), P(p + ".bv"));
    const Var a = attention(t, q, k, v, ql, kl, m.config_.heads, causal);
    return linear(t, a, P(p + ".wo"), P(p + ".bo"));
  }

  Var ffn(Var x, const std::string& p) {
    const Var h = relu(t, linear(t, x, P(p + ".w1"), P(p + ".b1")));
    return linear(t, h, P(p + ".w2"), P(p + ".b2"));
  }

  Var encode(Var table, const std::vector<Index>& ids, const SequenceLayout& layout) {
    Var x = embed(table, ids, layout);
    for (std::size_t l = 0; l < m.config_.enc_layers; ++l) {
      const std::string p = "enc" + std::to_string(l);
      const Var h = norm(x, p + ".ln1");
      x = add(t, x, drop(attend(h, h, p + ".self", layout, layout, false)));
      x = add(t, x, drop(ffn(norm(x, p + ".ln2"), p + ".ffn")));
    }
    return norm(x, "enc.ln");
  }

  Var decode(Var table, const std::vector<Index>& ids, const SequenceLayout& layout, Var memory,
             const SequenceLayout& mem_layout) {
    Var x = embed(table, ids, layout);
    for (std::size_t l = 0; l < m.config_.dec_layers; ++l) {
      const std::string p = "dec" + std::to_string(l);
      const Var h = norm(x, p + ".ln1");
      x = add(t, x, drop(attend(h, h, p + ".self", layout, layout, true)));
      x = add(t, x, drop(attend(norm(x, p + ".ln2"), memory, p + ".cross", layout, mem_layout, false)));
      x = add(t, x, drop(ffn(norm(x, p + ".ln3"), p + ".ffn")));
    }
    return norm(x, "dec.ln");
  }
};

namespace {

struct Packed {
  std::vector<Index> ids;
  SequenceLayout layout;
};

template <typename Get>
Packed pack(std::size_t n, Get get) {
  Packed out;
  std::vector<std::size_t> lengths;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& seq = get(i);
    lengths.push_back(seq.size());
    out.ids.insert(out.ids.end(), seq.begin(), seq.end());
  }
  out.layout = SequenceLayout::from_lengths(lengths);
  return out;
}

}  // namespace

BatchStats TranslationModel::forward_loss(std::span<const Example> batch, Rng* dropout_rng, bool accumulate_grad,
                                          GraphTiming* timing) {
  if (batch.empty()) throw ValidationError("empty batch");
  Tape t(accumulate_grad);
  Pass pass{t, *this, dropout_rng && config_.dropout > 0.0 ? dropout_rng : nullptr, timing};
  const auto src = pack(batch.size(), [&](std::size_t i) -> const std::vector<Index>& { return batch[i].src; });
  const auto dec = pack(batch.size(), [&](std::size_t i) -> const std::vector<Index>& { return batch[i].dec_in; });
  std::vector<Index> targets;
  for (const auto& ex : batch) {
    if (ex.dec_out.size() != ex.dec_in.size()) throw ValidationError("decoder input and output lengths differ");
    targets.insert(targets.end(), ex.dec_out.begin(), ex.dec_out.end());
  }
  for (Index id : src.ids)
    if (id >= vocab_.size()) throw ValidationError("token index " + std::to_string(id) + " outside the vocabulary");
  for (Index id : targets)
    if (id >= vocab_.size()) throw ValidationError("token index " + std::to_string(id) + " outside the vocabulary");

  const auto [x, h] = pass.tables();
  const Var memory = pass.encode(h, src.ids, src.layout);
  const Var out = pass.decode(h, dec.ids, dec.layout, memory, src.layout);
  const Var logits = matmul_nt(t, out, pass.output_table(x, h));
  const auto ce = cross_entropy(t, logits, targets, config_.label_smoothing);

  BatchStats s;
  s.loss = t.value(ce.loss)(0, 0);
  s.nll_sum = ce.nll_sum;
  s.tokens = ce.tokens;
  s.correct = ce.correct;
  s.src_tokens = src.ids.size();
  if (accumulate_grad) t.backward(ce.loss);
  return s;
}

BatchStats TranslationModel::evaluate(std::span<const Example> examples, std::size_t batch_size) const {
  BatchStats total;
  if (batch_size == 0) throw ValidationError("batch size must be positive");
  auto& self = const_cast<TranslationModel&>(*this);
  for (std::size_t i = 0; i < examples.size(); i += batch_size) {
    const auto n = std::min(batch_size, examples.size() - i);
    total += self.forward_loss(examples.subspan(i, n), nullptr, false);
  }
  return total;
}

std::vector<std::vector<Index>> TranslationModel::greedy_decode(std::span<const std::vector<Index>> sources,
                                                                std::size_t max_len, std::size_t batch_size) const {
  std::vector<std::vector<Index>> out(sources.size());
  if (sources.empty() || max_len == 0) return out;
  if (batch_size == 0) throw ValidationError("batch size must be positive");
  max_len = std::min(max_len, config_.max_len);
  for (std::size_t start = 0; start < sources.size(); start += batch_size) {
    const auto n = std::min(batch_size, sources.size() - start);
    Tape t(false);
    Pass pass{t, *this, nullptr};
    const auto src = pack(n, [&](std::size_t i) -> const std::vector<Index>& { return sources[start + i]; });
    for (Index id : src.ids)
      if (id >= vocab_.size()) throw ValidationError("token index " + std::to_string(id) + " outside the vocabulary");
    const auto [x, h] = pass.tables();
    const Var memory = pass.encode(h, src.ids, src.layout);
    const Var proj = pass.output_table(x, h);

    std::vector<std::vector<Index>> prefix(n, std::vector<Index>{Vocabulary::kBos});
    std::vector<bool> done(n, false);
    for (std::size_t step = 0; step < max_len; ++step) {
      const auto dec = pack(n, [&](std::size_t i) -> const std::vector<Index>& { return prefix[i]; });
      const Var dec_out = pass.decode(h, dec.ids, dec.layout, memory, src.layout);
      const Matrix& states = t.value(dec_out);
      const Matrix& table = t.value(proj);
      bool all_done = true;
      for (std::size_t i = 0; i < n; ++i) {
        if (done[i]) {
          prefix[i].push_back(Vocabulary::kPad);
          continue;
        }
        const auto row = static_cast<Eigen::Index>(dec.layout.offsets[i] + dec.layout.lengths[i] - 1);
        Eigen::Index best = 0;
        (table * states.row(row).transpose()).maxCoeff(&best);
        const auto id = static_cast<Index>(best);
        if (id == Vocabulary::kEos) {
          done[i] = true;
        } else {
          out[start + i].push_back(id);
          all_done = false;
        }
        prefix[i].push_back(id);
      }
      if (all_done) break;
    }
  }
  return out;
}

Sentence TranslationModel::translate(const Sentence& src, std::string_view tgt_lang, std::size_t max_len) const {
  const std::vector<std::vector<Index>> in{make_source(vocab_, src, tgt_lang, config_.max_len)};
  return vocab_.decode(greedy_decode(in, max_len).front());
}

TensorArchive TranslationModel::to_archive(std::string_view provenance) const {
  TensorArchive ar;
  ar.metadata = std::string(provenance);
  for (const auto& p : params_) ar.add(p->name, p->value);
  return ar;
}

void TranslationModel::load_archive(const TensorArchive& archive) {
  if (archive.entries().size() != params_.size())
    throw ValidationError("checkpoint has " + std::to_string(archive.entries().size()) + " tensors, model expects " +
                          std::to_string(params_.size()));
  for (auto& p : params_) {
    const Matrix& m = archive.get(p->name);
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
      throw ValidationError("checkpoint tensor '" + p->name + "' has the wrong shape");
    if (!m.allFinite()) throw ValidationError("checkpoint tensor '" + p->name + "' has non-finite values");
    p->value = m;
  }
}

void TranslationModel::save(const std::filesystem::path& dir, std::string_view provenance) const {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "config.ini", config_.to_ini());
  vocab_.save(dir / "vocab.txt");
  if (graph_) save_graph(*graph_, dir / "graph.bin", provenance);
  to_archive(provenance).save(dir / "model.bin");
}

TranslationModel TranslationModel::load(const std::filesystem::path& dir) {
  auto config = ModelConfig::load(dir / "config.ini");
  auto vocab = Vocabulary::load(dir / "vocab.txt");
  std::optional<EquivalenceGraph> graph;
  if (config.hops > 0) graph = load_graph(dir / "graph.bin");
  TranslationModel m(std::move(config), std::move(vocab), std::move(graph), 0);
  m.load_archive(TensorArchive::load(dir / "model.bin"));
  return m;
}

}  // namespace graphmerge::nmt
