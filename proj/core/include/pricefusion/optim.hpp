#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pricefusion/layers.hpp"
#include "pricefusion/tensor.hpp"

namespace pricefusion {

/// Number of price classes predicted by every model head.
inline constexpr std::size_t kNumClasses = 4;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Which weight tensors receive the L1 penalty.
enum class L1Scope {
  OutputLayer,  ///< only the dense layer feeding the softmax
  AllWeights,   ///< every Dense/Conv2D weight tensor
};

std::string_view l1_scope_name(L1Scope scope);
L1Scope parse_l1_scope(std::string_view text);

struct TrainingConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 32;
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-8;
  double l1_alpha = 0.1;
  L1Scope l1_scope = L1Scope::OutputLayer;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

namespace nn {

/// Mean categorical cross-entropy of `probs` [N, 4] against `labels`.
/// Probabilities are clamped at 1e-12 before the logarithm.
template <typename T>
double cross_entropy(const BasicTensor<T>& probs, std::span<const int> labels);

/// Sum of |w| over regularized parameters.
template <typename T>
double l1_norm(std::span<const Parameter<T>> params);

/// Cross-entropy plus l1_alpha * sum |w| over weight tensors (biases excluded).
template <typename T>
double loss_ce_l1(const BasicTensor<T>& probs, std::span<const int> labels, std::span<const Parameter<T>> params,
                  double l1_alpha);

/// d(mean CE)/d(logits) = (probs - onehot) / N.
template <typename T>
BasicTensor<T> cross_entropy_logit_grad(const BasicTensor<T>& probs, std::span<const int> labels);

/// d(mean CE)/d(probs) = -onehot / (N * probs).
template <typename T>
BasicTensor<T> cross_entropy_prob_grad(const BasicTensor<T>& probs, std::span<const int> labels);

/// Clears `regularized` on weights outside `scope`. Parameters must be in
/// graph order (tabular, image, head).
template <typename T>
void apply_l1_scope(std::span<Parameter<T>> params, L1Scope scope);

/// Adds l1_alpha * sign(w) to each regularized gradient; sign(0) = 0.
template <typename T>
void add_l1_subgradient(std::span<const Parameter<T>> params, double l1_alpha);

/// Running mean of squared gradients, one tensor per parameter.
template <typename T>
struct RmspropState {
  std::vector<BasicTensor<T>> mean_square;

  static RmspropState zeros_like(std::span<const Parameter<T>> params);
};

/// state <- decay*state + (1-decay)*g^2 ; p <- p - lr*g/(sqrt(state)+eps)
template <typename T>
void rmsprop_update(BasicTensor<T>& param, const BasicTensor<T>& grad, BasicTensor<T>& mean_square,
                    const TrainingConfig& cfg);

/// Applies rmsprop_update to every parameter using its stored gradient.
template <typename T>
void rmsprop_step(std::span<const Parameter<T>> params, RmspropState<T>& state, const TrainingConfig& cfg);

}  // namespace nn
}  // namespace pricefusion
