#include "relnov/training/optimizer.hpp"

#include <cmath>
#include <string>

namespace relnov {
namespace {

template <typename T>
void prepare(const std::vector<ParamRef<T>>& params, OptimizerState<T>& state) {
  if (state.momentum.size() != params.size()) {
    state.momentum.clear();
    for (const auto& p : params) state.momentum.emplace_back(p.tensor->size(), T{0});
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.momentum[i].size() != params[i].tensor->size()) {
      throw ContractError("optimizer: state does not mirror parameter " + params[i].name);
    }
    const auto grad = params[i].tensor->grad();
    for (T g : grad) {
      if (!std::isfinite(g)) throw NumericError("optimizer: non-finite gradient in " + params[i].name);
    }
  }
}

}  // namespace

template <typename T>
void lars_step(const std::vector<ParamRef<T>>& params, OptimizerState<T>& state,
               const TrainConfig& cfg, double lr) {
  prepare(params, state);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].tensor->data();
    const auto g = params[i].tensor->grad();
    auto& m = state.momentum[i];
    double w_norm = 0, g_norm = 0;
    std::vector<double> decayed(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
      decayed[k] = static_cast<double>(g[k]) + cfg.weight_decay * static_cast<double>(w[k]);
      w_norm += static_cast<double>(w[k]) * static_cast<double>(w[k]);
      g_norm += decayed[k] * decayed[k];
    }
    w_norm = std::sqrt(w_norm);
    g_norm = std::sqrt(g_norm);
    const double local_lr = w_norm > 0 ? cfg.trust_coefficient * w_norm / (g_norm + 1e-12) : 1.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = static_cast<T>(cfg.momentum * static_cast<double>(m[k]) + local_lr * lr * decayed[k]);
      w[k] -= m[k];
    }
  }
  ++state.step;
}

template <typename T>
void sgd_step(const std::vector<ParamRef<T>>& params, OptimizerState<T>& state,
              const TrainConfig& cfg, double lr) {
  prepare(params, state);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].tensor->data();
    const auto g = params[i].tensor->grad();
    auto& m = state.momentum[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double decayed = static_cast<double>(g[k]) + cfg.weight_decay * static_cast<double>(w[k]);
      m[k] = static_cast<T>(cfg.momentum * static_cast<double>(m[k]) + decayed);
      w[k] = static_cast<T>(static_cast<double>(w[k]) - lr * static_cast<double>(m[k]));
    }
  }
  ++state.step;
}

template <typename T>
void optimizer_step(const std::vector<ParamRef<T>>& params, OptimizerState<T>& state,
                    const TrainConfig& cfg, double lr) {
  if (cfg.optimizer == OptimizerKind::lars) {
    lars_step(params, state, cfg, lr);
  } else {
    sgd_step(params, state, cfg, lr);
  }
}

template void lars_step(const std::vector<ParamRef<float>>&, OptimizerState<float>&, const TrainConfig&, double);
template void lars_step(const std::vector<ParamRef<double>>&, OptimizerState<double>&, const TrainConfig&, double);
template void sgd_step(const std::vector<ParamRef<float>>&, OptimizerState<float>&, const TrainConfig&, double);
template void sgd_step(const std::vector<ParamRef<double>>&, OptimizerState<double>&, const TrainConfig&, double);
template void optimizer_step(const std::vector<ParamRef<float>>&, OptimizerState<float>&, const TrainConfig&, double);
template void optimizer_step(const std::vector<ParamRef<double>>&, OptimizerState<double>&, const TrainConfig&, double);

}  // namespace relnov
