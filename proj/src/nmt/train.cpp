#include "graphmerge/nmt/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "graphmerge/binary_io.hpp"
#include "graphmerge/rng.hpp"
#include "graphmerge/runtime.hpp"

namespace graphmerge::nmt {

void Adam::step(const std::vector<Parameter*>& params, double lr) {
  ++step_;
  if (moments_.empty())
    for (const auto* p : params)
      moments_.push_back({p->name, {Matrix::Zero(p->value.rows(), p->value.cols()), Matrix::Zero(p->value.rows(), p->value.cols())}});
  if (moments_.size() != params.size()) throw ValidationError("optimizer state does not match the parameter list");
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    if (!p->trainable) continue;
    if (moments_[i].first != p->name) throw ValidationError("optimizer state does not match the parameter list");
    auto& [m, v] = moments_[i].second;
    m = beta1_ * m + (1.0 - beta1_) * p->grad;
    v = beta2_ * v + (1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
    p->value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

TensorArchive Adam::state() const {
  TensorArchive ar;
  ar.metadata = "step=" + std::to_string(step_);
  for (const auto& [name, mv] : moments_) {
    ar.add(name + ".m", mv.first);
    ar.add(name + ".v", mv.second);
  }
  return ar;
}

void Adam::restore(const TensorArchive& archive) {
  const auto& md = archive.metadata;
  if (md.rfind("step=", 0) != 0) throw ValidationError("optimizer state has no step counter");
  step_ = std::stoull(md.substr(5));
  moments_.clear();
  const auto& e = archive.entries();
  if (e.size() % 2 != 0) throw ValidationError("optimizer state is incomplete");
  for (std::size_t i = 0; i < e.size(); i += 2) {
    const auto name = e[i].first.substr(0, e[i].first.size() - 2);
    moments_.push_back({name, {e[i].second, e[i + 1].second}});
  }
}

EncodedCorpus encode_collection(const CorpusCollection& directions, const Vocabulary& vocab, std::size_t max_len) {
  EncodedCorpus out;
  for (const auto& c : directions.corpora()) {
    out.directions.push_back(c.src_lang + "-" + c.tgt_lang);
    auto& exs = out.examples.emplace_back();
    exs.reserve(c.size());
    for (const auto& p : c.pairs) exs.push_back(make_example(vocab, p.src, p.tgt, c.tgt_lang, max_len));
  }
  return out;
}

namespace {

std::string real_str(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void zero_grads(const std::vector<Parameter*>& params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace

std::string format_log_csv(const std::vector<LogRow>& log, std::string_view provenance) {
  std::ostringstream o;
  if (!provenance.empty()) o << "# " << provenance << "\n";
  o << "step,lr,train_loss,dev_loss,wps\n";
  for (const auto& r : log)
    o << r.step << "," << real_str(r.lr, 9) << "," << real_str(r.train_loss, 6) << "," << real_str(r.dev_loss, 6) << ","
      << real_str(r.wps, 1) << "\n";
  return o.str();
}

void save_table(const Matrix& table, const std::filesystem::path& path, std::string_view provenance) {
  TensorArchive ar;
  ar.metadata = std::string(provenance);
  ar.add("table", table);
  ar.save(path);
}

Matrix load_table(const std::filesystem::path& path) { return TensorArchive::load(path).get("table"); }

TrainResult train(TranslationModel& model, const CorpusCollection& train_set, const CorpusCollection& dev_set,
                  std::uint64_t seed, const TrainOptions& options) {
  configure_allocator();
  const auto& cfg = model.config();
  if (train_set.empty()) throw ValidationError("no training data");
  if (dev_set.empty()) throw ValidationError("no dev data");
  const auto directions = train_set.with_reverse_directions();
  const auto encoded = encode_collection(directions, model.vocab(), cfg.max_len);
  const auto dev_dirs = dev_set.with_reverse_directions();
  const auto dev_encoded = encode_collection(dev_dirs, model.vocab(), cfg.max_len);
  std::vector<Example> dev_examples;
  for (const auto& v : dev_encoded.examples) dev_examples.insert(dev_examples.end(), v.begin(), v.end());

  const auto sizes = directions.sizes();
  const auto weights = temperature_weights(sizes, cfg.temperature);
  const std::uint64_t batch_seed = derive_seed(seed, "batches");
  Rng dropout_rng(derive_seed(seed, "dropout"));
  Adam adam(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  auto params = model.parameters();

  TrainResult result;
  result.best_dev_loss = std::numeric_limits<double>::infinity();
  std::optional<TensorArchive> best;
  std::size_t since_best = 0;
  double window_loss = 0.0, window_tokens_time = 0.0;
  std::size_t window_steps = 0, window_tokens = 0;

  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);

  auto save_best = [&] {
    if (options.out_dir.empty()) return;
    model.save(options.out_dir, options.provenance);
    save_table(model.input_table(), options.out_dir / "reparam.bin", options.provenance);
  };

  std::vector<Example> batch;
  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    const auto picks = sample_batch(directions, weights, cfg.batch_size, derive_seed(batch_seed, std::to_string(step)));
    batch.clear();
    for (const auto& s : picks) batch.push_back(encoded.examples[s.corpus][s.pair]);

    const auto t0 = std::chrono::steady_clock::now();
    zero_grads(params);
    const auto stats = model.forward_loss(batch, &dropout_rng, true);
    if (!std::isfinite(stats.loss))
      throw RuntimeError("training diverged at step " + std::to_string(step) + ": loss is " + std::to_string(stats.loss) +
                         " (lr " + std::to_string(inverse_sqrt_lr(step, cfg.lr_peak, cfg.warmup_steps)) + ")");
    const double lr = inverse_sqrt_lr(step, cfg.lr_peak, cfg.warmup_steps);
    adam.step(params, lr);
    window_tokens_time += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    result.step_losses.push_back(stats.loss);
    result.steps = step;
    window_loss += stats.loss;
    ++window_steps;
    window_tokens += stats.src_tokens + stats.tokens;

    if (step % cfg.checkpoint_interval == 0 || step == cfg.max_steps) {
      const auto dev = model.evaluate(dev_examples, cfg.batch_size);
      LogRow row{step, lr, window_loss / static_cast<double>(window_steps), dev.nll(),
                 window_tokens_time > 0 ? static_cast<double>(window_tokens) / window_tokens_time : 0.0};
      result.log.push_back(row);
      if (options.on_log) options.on_log(row);
      window_loss = window_tokens_time = 0.0;
      window_steps = window_tokens = 0;
      if (dev.nll() < result.best_dev_loss) {
        result.best_dev_loss = dev.nll();
        result.best_step = step;
        best = model.to_archive();
        since_best = 0;
        save_best();
      } else if (++since_best >= cfg.patience) {
        result.early_stopped = true;
        break;
      }
    }
  }

  if (!options.out_dir.empty()) {
    adam.state().save(options.out_dir / "optimizer.bin");
    write_file_atomic(options.out_dir / "rng.txt", dropout_rng.state() + "\n");
    write_file_atomic(options.out_dir / "train_log.csv", format_log_csv(result.log, options.provenance));
  }
  if (options.restore_best && best) model.load_archive(*best);
  return result;
}

}  // namespace graphmerge::nmt
