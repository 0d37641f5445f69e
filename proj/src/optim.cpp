#include "gmg/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace gmg {

Adam::Adam(std::vector<NamedTensor> params, AdamOptions options) : options_(options) {
  slots_.reserve(params.size());
  for (auto& [name, t] : params) {
    const std::size_t n = t.numel();
    slots_.push_back(Slot{std::move(name), t, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
  }
}

void Adam::step() {
  for (const auto& s : slots_) {
    if (!s.param.has_grad()) throw std::logic_error("adam: parameter '" + s.name + "' has no gradient");
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(options_.beta1, t);
  const double c2 = 1.0 - std::pow(options_.beta2, t);
  for (auto& s : slots_) {
    auto values = s.param.data_mut();
    const auto g = s.param.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      s.m[i] = options_.beta1 * s.m[i] + (1.0 - options_.beta1) * g[i];
      s.v[i] = options_.beta2 * s.v[i] + (1.0 - options_.beta2) * g[i] * g[i];
      const double m_hat = s.m[i] / c1;
      const double v_hat = s.v[i] / c2;
      values[i] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& s : slots_) s.param.zero_grad();
}

}  // namespace gmg
