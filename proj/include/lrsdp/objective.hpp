#pragma once

#include <concepts>
#include <span>

#include "lrsdp/matcore.hpp"

namespace lrsdp {

using BatchIndex = std::span<const Index>;

/// Finite-sum objective f(X) = (1/n) sum_i f_i(X) over symmetric matrices.
template <class O>
concept Objective = requires(const O& o, const SymMatrix& x, BatchIndex batch) {
  { o.num_samples() } -> std::convertible_to<Index>;
  { o.dim() } -> std::convertible_to<Index>;
  { o.value_full(x) } -> std::convertible_to<double>;
  { o.grad_full(x) } -> std::same_as<SymMatrix>;
  { o.grad_batch(x, batch) } -> std::same_as<SymMatrix>;
};

/// Objectives that can form (1/b) sum_{i in batch} (grad f_i(X) - grad f_i(Y))
/// more accurately or cheaply than two separate batch gradients.
template <class O>
concept HasBatchDifference =
    Objective<O> && requires(const O& o, const SymMatrix& x, BatchIndex batch) {
      { o.grad_batch_diff(x, x, batch) } -> std::same_as<SymMatrix>;
    };

/// Objectives built around a known optimum X* = U* U*^T.
template <class O>
concept HasPlantedOptimum = Objective<O> && requires(const O& o) {
  { o.planted_factor() } -> std::convertible_to<const Factor&>;
  { o.planted_matrix() } -> std::convertible_to<const SymMatrix&>;
};

template <Objective O>
SymMatrix batch_gradient_difference(const O& obj, const SymMatrix& x, const SymMatrix& anchor,
                                    BatchIndex batch) {
  if constexpr (HasBatchDifference<O>) {
    return obj.grad_batch_diff(x, anchor, batch);
  } else {
    return obj.grad_batch(x, batch) - obj.grad_batch(anchor, batch);
  }
}

}  // namespace lrsdp
