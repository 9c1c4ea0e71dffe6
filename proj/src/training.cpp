#include "stfcn/training.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <numeric>
#include <ostream>
#include <thread>

#include "stfcn/random.hpp"

namespace stfcn {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  if (!(adagrad_epsilon > 0.0)) throw ConfigError("adagrad_epsilon must be > 0");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation_fraction must be in [0, 1)");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

double mse_loss(const Tensord& pred, const Tensord& target) {
  require_same_shape(pred.shape(), target.shape(), "mse_loss");
  return sumsq(sub(pred, target)) / static_cast<double>(pred.size());
}

Tensord mse_gradient(const Tensord& pred, const Tensord& target) {
  require_same_shape(pred.shape(), target.shape(), "mse_gradient");
  Tensord g = sub(pred, target);
  g.data() *= 2.0 / static_cast<double>(pred.size());
  return g;
}

AdagradState make_adagrad_state(const ModelGraph& model) { return AdagradState{model.zero_gradients()}; }

void adagrad_step(std::span<Tensord* const> params, std::span<const Tensord> grads, AdagradState& state, double lr,
                  double eps) {
  if (params.size() != grads.size() || params.size() != state.accumulators.size())
    throw ShapeError("adagrad_step: parameter, gradient and state counts differ");
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensord& p = *params[k];
    Tensord& acc = state.accumulators[k];
    const Tensord& g = grads[k];
    require_same_shape(p.shape(), g.shape(), "adagrad_step");
    require_same_shape(p.shape(), acc.shape(), "adagrad_step");
    acc.data().array() += g.data().array().square();
    p.data().array() -= lr * g.data().array() / (acc.data().array().sqrt() + eps);
  }
}

double sample_gradient(const ModelGraph& model, const VolumeSample& sample, Gradients& grads) {
  const ForwardTrace trace = model.forward_trace(sample.input);
  grads = model.backward(trace, mse_gradient(trace.output, sample.target));
  return mse_loss(trace.output, sample.target);
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, n);
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t k = w; k < n; k += workers) fn(k);
    });
  for (std::size_t k = 0; k < n; k += workers) fn(k);
}

double batch_gradient(const ModelGraph& model, std::span<const VolumeSample> samples, std::span<const std::size_t> indices,
                      unsigned threads, Gradients& grads) {
  if (indices.empty()) throw ShapeError("batch_gradient: empty batch");
  grads = model.zero_gradients();
  const std::size_t wave = std::max(1u, threads);
  std::vector<Gradients> slot(wave);
  std::vector<double> loss(wave);
  double total = 0.0;
  for (std::size_t start = 0; start < indices.size(); start += wave) {
    const std::size_t count = std::min(wave, indices.size() - start);
    parallel_for(count, threads, [&](std::size_t k) {
      loss[k] = sample_gradient(model, samples[indices[start + k]], slot[k]);
    });
    for (std::size_t k = 0; k < count; ++k) {
      total += loss[k];
      for (std::size_t p = 0; p < grads.size(); ++p) accumulate(grads[p], slot[k][p]);
    }
  }
  const double scale = 1.0 / static_cast<double>(indices.size());
  for (Tensord& g : grads) g.data() *= scale;
  return total * scale;
}

double mean_loss(const ModelGraph& model, std::span<const VolumeSample> samples, unsigned threads) {
  if (samples.empty()) throw ShapeError("mean_loss: no samples");
  std::vector<double> loss(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t k) {
    loss[k] = mse_loss(model.forward(samples[k].input), samples[k].target);
  });
  return std::accumulate(loss.begin(), loss.end(), 0.0) / static_cast<double>(samples.size());
}

namespace {

bool finite(const Gradients& grads) {
  for (const Tensord& g : grads)
    if (!all_finite(g)) return false;
  return true;
}

std::vector<Tensord> snapshot(const ModelGraph& model) {
  std::vector<Tensord> out;
  for (const Tensord* p : model.parameters()) out.push_back(*p);
  return out;
}

void restore(ModelGraph& model, const std::vector<Tensord>& saved) {
  auto params = model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) *params[k] = saved[k];
}

}  // namespace

TrainReport train(ModelGraph& model, std::span<const VolumeSample> samples, const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  if (samples.empty()) throw ConfigError("train: no samples");
  for (const VolumeSample& s : samples) {
    require_same_shape(s.input.shape(), model.input_shape, "train input");
    require_same_shape(s.target.shape(), model.output_shape, "train target");
  }
  const auto n = samples.size();
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(n)));
  if (n_val >= n) throw ConfigError("train: validation split leaves no training samples");
  const auto train_set = samples.first(n - n_val);
  const auto val_set = samples.subspan(n - n_val);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  AdagradState state = make_adagrad_state(model);
  auto params = model.parameters();
  Gradients grads;

  TrainReport report;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Tensord> best_params = snapshot(model);
  Index since_best = 0;

  for (Index epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    Index batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      ++batch_no;
      const std::size_t count = std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, count);
      const double loss = batch_gradient(model, train_set, batch, cfg.threads, grads);
      if (!std::isfinite(loss) || !finite(grads))
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch_no));
      loss_sum += loss * static_cast<double>(count);
      adagrad_step(params, grads, state, cfg.learning_rate, cfg.adagrad_epsilon);
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()), 0.0};
    rec.val_loss = val_set.empty() ? rec.train_loss : mean_loss(model, val_set, cfg.threads);
    if (!std::isfinite(rec.val_loss))
      throw DivergenceError("validation loss diverged at epoch " + std::to_string(epoch));
    report.epochs.push_back(rec);
    if (log) *log << "epoch " << epoch << " train " << rec.train_loss << " val " << rec.val_loss << '\n';

    if (rec.val_loss < best) {
      best = rec.val_loss;
      best_params = snapshot(model);
      report.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  report.stopped_epoch = report.epochs.back().epoch;
  restore(model, best_params);
  report.checksum = parameter_checksum(model);
  return report;
}

void write_train_report(std::ostream& out, const TrainReport& report) {
  auto num = [&](double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, ptr - buf);
  };
  out << "epoch,train_loss,val_loss\n";
  for (const EpochRecord& e : report.epochs) {
    out << e.epoch << ',';
    num(e.train_loss);
    out << ',';
    num(e.val_loss);
    out << '\n';
  }
  out << "# stopped_epoch=" << report.stopped_epoch << " best_epoch=" << report.best_epoch << " checksum=" << std::hex
      << report.checksum << std::dec << '\n';
}

}  // namespace stfcn
