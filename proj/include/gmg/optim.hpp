#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gmg/tensor.hpp"

namespace gmg {

using NamedTensor = std::pair<std::string, Tensor>;

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers live per parameter for the
/// lifetime of the optimizer.
class Adam {
 public:
  Adam(std::vector<NamedTensor> params, AdamOptions options = {});

  /// One update from the gradients currently held by the parameters.
  /// Throws std::logic_error naming the first parameter without a gradient.
  void step();
  void zero_grad();

  std::size_t steps_taken() const noexcept { return step_; }
  const AdamOptions& options() const noexcept { return options_; }
  void set_lr(double lr) { options_.lr = lr; }

 private:
  struct Slot {
    std::string name;
    Tensor param;
    std::vector<double> m;
    std::vector<double> v;
  };

  std::vector<Slot> slots_;
  AdamOptions options_;
  std::size_t step_ = 0;
};

}  // namespace gmg
