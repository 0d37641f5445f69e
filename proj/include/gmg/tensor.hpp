#pragma once

// Dense float64 tensors with a dynamic reverse-mode gradient tape.
//
// A Tensor is a cheap handle onto shared storage. Ops on tensors that
// require gradients record a node holding their parents and a backward
// rule; Tensor::backward() walks that graph once in reverse topological
// order and accumulates (sums) gradients into every requires_grad leaf.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gmg {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorNode;
}

class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor eye(std::size_t n);

  bool defined() const noexcept { return node_ != nullptr; }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Mutable view of the values. Mutating a tensor that already feeds a
  /// recorded graph invalidates that graph's gradients.
  std::span<double> data_mut();

  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> grad_mut();
  void zero_grad();

  /// Same values, fresh storage, no graph.
  Tensor detach() const;

  /// Reverse pass from a scalar. Gradients add onto whatever the leaves
  /// already hold; call zero_grad() between independent passes.
  void backward() const;

  /// Identity of the underlying storage (two handles may alias).
  const void* id() const noexcept { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node);

  std::shared_ptr<detail::TensorNode> node_;

  friend struct TensorAccess;
};

enum class DivPolicy {
  ieee,    ///< x/0 follows IEEE 754 (inf / nan)
  strict,  ///< any zero denominator raises NumericError
};

// Elementwise binary ops broadcast by aligning trailing dimensions; a
// dimension broadcasts only when it is 1 on one side.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b, DivPolicy policy = DivPolicy::ieee);

Tensor add_scalar(const Tensor& a, double s);
Tensor scale(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
/// log(1 + e^x), evaluated without overflow.
Tensor softplus(const Tensor& a);
/// Log-softmax over the last axis, max-shifted.
Tensor log_softmax(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Reduce away one axis.
Tensor sum_axis(const Tensor& a, std::size_t axis);
Tensor mean_axis(const Tensor& a, std::size_t axis);

/// [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Left-multiplies every [n,C] block of x by m: x is [n,C] or [G,n,C].
Tensor node_mix(const Tensor& m, const Tensor& x);

/// Per-node temporal convolution. x: [B,T,N,C], kernel: [K,C,C'].
/// out[b,t,n,:] = sum_k x[b, t+k-pad, n, :] . kernel[k], zero outside [0,T).
Tensor temporal_conv(const Tensor& x, const Tensor& kernel, std::size_t pad);

Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, double s);
Tensor operator*(double s, const Tensor& a);
Tensor operator-(const Tensor& a);

}  // namespace gmg
