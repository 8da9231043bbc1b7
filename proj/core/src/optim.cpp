#include "pricefusion/optim.hpp"

#include <cmath>

namespace pricefusion {

std::string_view l1_scope_name(L1Scope scope) {
  return scope == L1Scope::AllWeights ? "all" : "output";
}

L1Scope parse_l1_scope(std::string_view text) {
  if (text == "output") return L1Scope::OutputLayer;
  if (text == "all") return L1Scope::AllWeights;
  throw ConfigError("l1_scope must be 'output' or 'all', got '" + std::string(text) + "'");
}

void TrainingConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be finite and non-negative");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(rmsprop_decay > 0.0 && rmsprop_decay < 1.0)) throw ConfigError("rmsprop_decay must lie in (0, 1)");
  if (!(rmsprop_epsilon > 0.0)) throw ConfigError("rmsprop_epsilon must be positive");
  if (!(l1_alpha >= 0.0) || !std::isfinite(l1_alpha)) throw ConfigError("l1_alpha must be finite and non-negative");
}

namespace nn {
namespace {

template <typename T>
void check_labels(const BasicTensor<T>& probs, std::span<const int> labels) {
  if (probs.rank() != 2 || probs.dim(1) != kNumClasses) {
    throw ShapeError("expected probabilities [N, 4], got " + shape_string(probs.shape()));
  }
  if (labels.size() != probs.dim(0)) {
    throw ShapeError("label count " + std::to_string(labels.size()) + " does not match batch " +
                     shape_string(probs.shape()));
  }
  for (int y : labels) {
    if (y < 0 || y >= static_cast<int>(kNumClasses)) {
      throw std::invalid_argument("label " + std::to_string(y) + " outside {0,1,2,3}");
    }
  }
}

}  // namespace

template <typename T>
double cross_entropy(const BasicTensor<T>& probs, std::span<const int> labels) {
  check_labels(probs, labels);
  const std::size_t n = labels.size();
  if (n == 0) return 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double row = 0.0;
    for (std::size_t j = 0; j < kNumClasses; ++j) row += probs[r * kNumClasses + j];
    if (std::abs(row - 1.0) > 1e-5) {
      throw std::invalid_argument("probability row " + std::to_string(r) + " sums to " + std::to_string(row));
    }
  }
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double p = static_cast<double>(probs[r * kNumClasses + static_cast<std::size_t>(labels[r])]);
    total -= std::log(std::max(p, 1e-12));
  }
  return total / static_cast<double>(n);
}

template <typename T>
double l1_norm(std::span<const Parameter<T>> params) {
  double total = 0.0;
  for (const auto& p : params) {
    if (!p.regularized) continue;
    for (T v : p.value->data()) total += std::abs(static_cast<double>(v));
  }
  return total;
}

template <typename T>
double loss_ce_l1(const BasicTensor<T>& probs, std::span<const int> labels, std::span<const Parameter<T>> params,
                  double l1_alpha) {
  const double ce = cross_entropy(probs, labels);
  return l1_alpha == 0.0 ? ce : ce + l1_alpha * l1_norm(params);
}

template <typename T>
BasicTensor<T> cross_entropy_logit_grad(const BasicTensor<T>& probs, std::span<const int> labels) {
  check_labels(probs, labels);
  const double inv_n = 1.0 / static_cast<double>(std::max<std::size_t>(labels.size(), 1));
  BasicTensor<T> grad(probs.shape());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      const double target = static_cast<int>(j) == labels[r] ? 1.0 : 0.0;
      grad[r * kNumClasses + j] = static_cast<T>((static_cast<double>(probs[r * kNumClasses + j]) - target) * inv_n);
    }
  }
  return grad;
}

template <typename T>
BasicTensor<T> cross_entropy_prob_grad(const BasicTensor<T>& probs, std::span<const int> labels) {
  check_labels(probs, labels);
  const double inv_n = 1.0 / static_cast<double>(std::max<std::size_t>(labels.size(), 1));
  BasicTensor<T> grad(probs.shape());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const std::size_t i = r * kNumClasses + static_cast<std::size_t>(labels[r]);
    grad[i] = static_cast<T>(-inv_n / std::max(static_cast<double>(probs[i]), 1e-12));
  }
  return grad;
}

template <typename T>
void apply_l1_scope(std::span<Parameter<T>> params, L1Scope scope) {
  if (scope == L1Scope::AllWeights) return;
  std::size_t last = params.size();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].regularized) last = i;
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i].regularized = params[i].regularized && i == last;
}

template <typename T>
void add_l1_subgradient(std::span<const Parameter<T>> params, double l1_alpha) {
  if (l1_alpha == 0.0) return;
  const T alpha = static_cast<T>(l1_alpha);
  for (const auto& p : params) {
    if (!p.regularized) continue;
    auto w = p.value->data();
    auto g = p.grad->data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] > T{0}) {
        g[i] += alpha;
      } else if (w[i] < T{0}) {
        g[i] -= alpha;
      }
    }
  }
}

template <typename T>
RmspropState<T> RmspropState<T>::zeros_like(std::span<const Parameter<T>> params) {
  RmspropState state;
  state.mean_square.reserve(params.size());
  for (const auto& p : params) state.mean_square.emplace_back(p.value->shape());
  return state;
}

template <typename T>
void rmsprop_update(BasicTensor<T>& param, const BasicTensor<T>& grad, BasicTensor<T>& mean_square,
                    const TrainingConfig& cfg) {
  if (param.shape() != grad.shape() || param.shape() != mean_square.shape()) {
    throw ShapeError("rmsprop: parameter " + shape_string(param.shape()) + ", gradient " +
                     shape_string(grad.shape()) + " and state " + shape_string(mean_square.shape()) + " disagree");
  }
  const double decay = cfg.rmsprop_decay;
  const double lr = cfg.learning_rate;
  const double eps = cfg.rmsprop_epsilon;
  auto p = param.data();
  auto g = grad.data();
  auto s = mean_square.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gi = g[i];
    const double si = decay * static_cast<double>(s[i]) + (1.0 - decay) * gi * gi;
    s[i] = static_cast<T>(si);
    p[i] = static_cast<T>(static_cast<double>(p[i]) - lr * gi / (std::sqrt(si) + eps));
  }
}

template <typename T>
void rmsprop_step(std::span<const Parameter<T>> params, RmspropState<T>& state, const TrainingConfig& cfg) {
  if (state.mean_square.size() != params.size()) {
    throw ShapeError("rmsprop: state holds " + std::to_string(state.mean_square.size()) + " tensors for " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    rmsprop_update(*params[i].value, *params[i].grad, state.mean_square[i], cfg);
  }
}

#define PRICEFUSION_INSTANTIATE_OPTIM(T)                                                                        \
  template double cross_entropy(const BasicTensor<T>&, std::span<const int>);                                 \
  template double l1_norm(std::span<const Parameter<T>>);                                                     \
  template double loss_ce_l1(const BasicTensor<T>&, std::span<const int>, std::span<const Parameter<T>>, double); \
  template BasicTensor<T> cross_entropy_logit_grad(const BasicTensor<T>&, std::span<const int>);              \
  template BasicTensor<T> cross_entropy_prob_grad(const BasicTensor<T>&, std::span<const int>);               \
  template void apply_l1_scope(std::span<Parameter<T>>, L1Scope);                                             \
  template void add_l1_subgradient(std::span<const Parameter<T>>, double);                                    \
  template struct RmspropState<T>;                                                                            \
  template void rmsprop_update(BasicTensor<T>&, const BasicTensor<T>&, BasicTensor<T>&, const TrainingConfig&); \
  template void rmsprop_step(std::span<const Parameter<T>>, RmspropState<T>&, const TrainingConfig&);

PRICEFUSION_INSTANTIATE_OPTIM(float)
PRICEFUSION_INSTANTIATE_OPTIM(double)

#undef PRICEFUSION_INSTANTIATE_OPTIM

}  // namespace nn
}  // namespace pricefusion
