#include "kae/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "kae/errors.hpp"
#include "kae/random.hpp"

namespace kae {

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("TrainConfig: " + msg); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) fail("betas must lie in (0,1)");
  if (!(epsilon > 0.0)) fail("epsilon must be > 0");
}

OptimizerState OptimizerState::zeros_like(const std::vector<Tensor>& params) {
  OptimizerState s;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.numel(), 0.0);
    s.second_moment.emplace_back(p.numel(), 0.0);
  }
  return s;
}

void adam_step(std::vector<Tensor>& params, OptimizerState& state, const TrainConfig& config) {
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw Error("adam_step: optimizer state does not match parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw Error("adam_step: parameter " + std::to_string(i) + " has no gradient");
    }
    if (state.first_moment[i].size() != params[i].numel()) {
      throw Error("adam_step: moment shape mismatch for parameter " + std::to_string(i));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(config.beta1, t);
  const double correct2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].mutable_data();
    const auto g = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correct1;
      const double v_hat = v[j] / correct2;
      w[j] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

TrainState start_training(const KaeConfig& model, const TrainConfig& config) {
  config.validate();
  TrainState s;
  s.model = model;
  s.params = init_params(model, config.seed);
  s.optimizer = OptimizerState::zeros_like(s.params.tensors());
  return s;
}

void continue_training(TrainState& state, const Dataset& data, const TrainConfig& config,
                       const TrainHooks& hooks) {
  config.validate();
  state.model.validate();
  if (data.clouds.empty()) throw ConfigError("train: dataset is empty");
  data.validate();
  if (data.n_points() != state.model.n_points) {
    throw ConfigError("train: dataset clouds have " + std::to_string(data.n_points()) +
                      " points but the model expects " + std::to_string(state.model.n_points));
  }
  const bool aux = state.model.aux_enabled();
  for (const auto& c : data.clouds) {
    if (aux && !c.label) throw ConfigError("train: aux branch needs labels, " + c.name + " has none");
    if (aux && *c.label >= state.model.n_classes) {
      throw ConfigError("train: label of " + c.name + " exceeds n_classes");
    }
  }

  std::vector<Tensor> inputs;
  inputs.reserve(data.clouds.size());
  for (const auto& c : data.clouds) inputs.push_back(to_tensor(c.points));

  std::vector<Tensor> params = state.params.tensors();
  std::vector<std::size_t> order(data.clouds.size());
  for (std::size_t epoch = state.epochs_completed + 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (config.shuffle) {
      auto rng = make_rng(config.seed, Stream::kShuffle, {epoch});
      std::shuffle(order.begin(), order.end(), rng);
    }
    double sum_chamfer = 0.0, sum_aux = 0.0, sum_total = 0.0;
    for (std::size_t idx : order) {
      state.params.zero_grad();
      Tape tape;
      const auto label = aux ? data.clouds[idx].label : std::nullopt;
      const ForwardResult r = forward(tape, state.model, state.params, inputs[idx], label);
      tape.backward(r.total_loss);
      adam_step(params, state.optimizer, config);

      StepInfo info;
      info.epoch = epoch;
      info.step = state.optimizer.step;
      info.chamfer = r.chamfer.item();
      info.aux = r.aux_loss ? r.aux_loss->item() : 0.0;
      info.total = r.total_loss.item();
      sum_chamfer += info.chamfer;
      sum_aux += info.aux;
      sum_total += info.total;
      if (hooks.on_step) hooks.on_step(info);
    }
    const double n = static_cast<double>(order.size());
    state.history.push_back(EpochStats{epoch, sum_chamfer / n, sum_aux / n, sum_total / n});
    state.epochs_completed = epoch;
    if (hooks.on_epoch_end) hooks.on_epoch_end(state);
  }
}

TrainResult train(const Dataset& data, const KaeConfig& model, const TrainConfig& config,
                  const TrainHooks& hooks) {
  TrainState state = start_training(model, config);
  continue_training(state, data, config, hooks);
  return TrainResult{std::move(state.params), std::move(state.history)};
}

void write_loss_csv(const std::vector<EpochStats>& history, std::ostream& out) {
  out << "epoch,mean_chamfer,mean_aux,mean_total\n";
  char buf[128];
  for (const auto& e : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.mean_chamfer, e.mean_aux,
                  e.mean_total);
    out << buf;
  }
}

}  // namespace kae
