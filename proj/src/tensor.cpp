#include "gmg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "gmg/errors.hpp"

namespace gmg {

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }

  std::vector<double>& grad_buf() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

struct TensorAccess {
  static const NodePtr& node(const Tensor& t) {
    if (!t.node_) throw std::logic_error("use of undefined Tensor");
    return t.node_;
  }
  static Tensor wrap(NodePtr n) { return Tensor(std::move(n)); }
};

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

const NodePtr& node_of(const Tensor& t) { return TensorAccess::node(t); }

// Builds the result node; the graph is recorded only if some parent needs it.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<NodePtr> parents,
                   std::function<void(TensorNode&)> backward) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [](const NodePtr& p) { return p->requires_grad; });
  if (needs) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward);
  }
  return TensorAccess::wrap(std::move(n));
}

// Offsets into each operand for every element of the broadcast output.
struct Broadcast {
  Shape out;
  std::vector<std::size_t> index_a;
  std::vector<std::size_t> index_b;
  bool same = false;
};

Broadcast broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast bc;
  if (a == b) {
    bc.out = a;
    bc.same = true;
    return bc;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  std::vector<std::size_t> stride_a(rank, 0), stride_b(rank, 0);
  std::size_t sa = 1, sb = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t axis = rank - 1 - i;
    const std::size_t da = i < a.size() ? a[a.size() - 1 - i] : 1;
    const std::size_t db = i < b.size() ? b[b.size() - 1 - i] : 1;
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                       " are not broadcast-compatible");
    }
    out[axis] = std::max(da, db);
    stride_a[axis] = da == 1 ? 0 : sa;
    stride_b[axis] = db == 1 ? 0 : sb;
    sa *= da;
    sb *= db;
  }
  const std::size_t total = shape_numel(out);
  bc.index_a.resize(total);
  bc.index_b.resize(total);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t o = 0; o < total; ++o) {
    bc.index_a[o] = ia;
    bc.index_b[o] = ib;
    for (std::size_t axis = rank; axis-- > 0;) {
      ++counter[axis];
      ia += stride_a[axis];
      ib += stride_b[axis];
      if (counter[axis] < out[axis]) break;
      ia -= stride_a[axis] * out[axis];
      ib -= stride_b[axis] * out[axis];
      counter[axis] = 0;
    }
  }
  bc.out = std::move(out);
  return bc;
}

// f(a, b) -> value; da(a, b) and db(a, b) -> local partials.
template <class F, class DA, class DB>
Tensor binary(const Tensor& ta, const Tensor& tb, const char* op, F f, DA da, DB db) {
  const NodePtr& a = node_of(ta);
  const NodePtr& b = node_of(tb);
  auto bc = std::make_shared<Broadcast>(broadcast(a->shape, b->shape, op));
  const std::size_t total = shape_numel(bc->out);
  std::vector<double> out(total);
  for (std::size_t o = 0; o < total; ++o) {
    const std::size_t i = bc->same ? o : bc->index_a[o];
    const std::size_t j = bc->same ? o : bc->index_b[o];
    out[o] = f(a->data[i], b->data[j]);
  }
  return make_result(bc->out, std::move(out), {a, b}, [a, b, bc, da, db](TensorNode& self) {
    const std::size_t total = self.data.size();
    for (std::size_t o = 0; o < total; ++o) {
      const std::size_t i = bc->same ? o : bc->index_a[o];
      const std::size_t j = bc->same ? o : bc->index_b[o];
      const double g = self.grad[o];
      if (a->requires_grad) a->grad_buf()[i] += g * da(a->data[i], b->data[j]);
      if (b->requires_grad) b->grad_buf()[j] += g * db(a->data[i], b->data[j]);
    }
  });
}

// f(x) -> value; df(x, y) -> derivative given input and output.
template <class F, class DF>
Tensor unary(const Tensor& ta, F f, DF df) {
  const NodePtr& a = node_of(ta);
  std::vector<double> out(a->data.size());
  std::transform(a->data.begin(), a->data.end(), out.begin(), f);
  return make_result(a->shape, std::move(out), {a}, [a, df](TensorNode& self) {
    auto& g = a->grad_buf();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(a->data[i], self.data[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor handle

Tensor::Tensor() = default;
Tensor::Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor shape " + shape_str(shape) + " holds " +
                     std::to_string(shape_numel(shape)) + " elements, got " +
                     std::to_string(values.size()));
  }
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->data = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

Tensor Tensor::eye(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return from({n, n}, std::move(v));
}

const Shape& Tensor::shape() const { return node_of(*this)->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return node_of(*this)->data.size(); }
std::span<const double> Tensor::data() const { return node_of(*this)->data; }
std::span<double> Tensor::data_mut() { return node_of(*this)->data; }

double Tensor::item() const {
  const auto& n = node_of(*this);
  if (n->data.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(n->shape));
  return n->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& n = node_of(*this);
  if (index.size() != n->shape.size()) {
    throw ShapeError("index rank " + std::to_string(index.size()) + " for shape " + shape_str(n->shape));
  }
  std::size_t flat = 0, axis = 0;
  for (std::size_t i : index) {
    if (i >= n->shape[axis]) throw ShapeError("index out of range for shape " + shape_str(n->shape));
    flat = flat * n->shape[axis++] + i;
  }
  return n->data[flat];
}

bool Tensor::requires_grad() const { return node_of(*this)->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  const auto& n = node_of(*this);
  if (!n->is_leaf()) throw std::logic_error("requires_grad can only be set on leaf tensors");
  n->requires_grad = on;
}

bool Tensor::has_grad() const {
  const auto& n = node_of(*this);
  return n->grad.size() == n->data.size();
}

std::span<const double> Tensor::grad() const {
  const auto& n = node_of(*this);
  if (!has_grad()) throw std::logic_error("tensor has no gradient");
  return n->grad;
}

std::span<double> Tensor::grad_mut() { return node_of(*this)->grad_buf(); }

void Tensor::zero_grad() { node_of(*this)->grad.clear(); }

Tensor Tensor::detach() const {
  const auto& n = node_of(*this);
  return from(n->shape, n->data, false);
}

void Tensor::backward() const {
  const NodePtr& root = node_of(*this);
  if (root->data.size() != 1 || !root->shape.empty()) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_str(root->shape));
  }
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior buffers restart from zero on every pass; leaves accumulate.
  for (TensorNode* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->data.size(), 0.0);
  }
  root->grad_buf()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!(*it)->is_leaf()) (*it)->backward_fn(**it);
  }
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b, DivPolicy policy) {
  if (policy == DivPolicy::strict) {
    const auto d = b.data();
    if (std::any_of(d.begin(), d.end(), [](double v) { return v == 0.0; })) {
      throw NumericError("div: zero denominator");
    }
  }
  return binary(
      a, b, "div", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
  return unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& a) {
  return unary(
      a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return stable_sigmoid(x); });
}

Tensor log_softmax(const Tensor& ta) {
  const NodePtr& a = node_of(ta);
  if (a->shape.empty()) throw ShapeError("log_softmax of a scalar");
  const std::size_t width = a->shape.back();
  const std::size_t rows = width == 0 ? 0 : a->data.size() / width;
  std::vector<double> out(a->data.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = a->data.data() + r * width;
    const double m = *std::max_element(x, x + width);
    double s = 0.0;
    for (std::size_t k = 0; k < width; ++k) s += std::exp(x[k] - m);
    const double lse = m + std::log(s);
    for (std::size_t k = 0; k < width; ++k) out[r * width + k] = x[k] - lse;
  }
  return make_result(a->shape, std::move(out), {a}, [a, rows, width](TensorNode& self) {
    auto& g = a->grad_buf();
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t base = r * width;
      double gsum = 0.0;
      for (std::size_t k = 0; k < width; ++k) gsum += self.grad[base + k];
      for (std::size_t k = 0; k < width; ++k) {
        g[base + k] += self.grad[base + k] - std::exp(self.data[base + k]) * gsum;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& ta) {
  const NodePtr& a = node_of(ta);
  double s = 0.0;
  for (double v : a->data) s += v;
  return make_result({}, {s}, {a}, [a](TensorNode& self) {
    auto& g = a->grad_buf();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& ta) {
  const std::size_t n = ta.numel();
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(ta), 1.0 / static_cast<double>(n));
}

Tensor sum_axis(const Tensor& ta, std::size_t axis) {
  const NodePtr& a = node_of(ta);
  if (axis >= a->shape.size()) {
    throw ShapeError("sum_axis: axis " + std::to_string(axis) + " out of range for " + shape_str(a->shape));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= a->shape[i];
  for (std::size_t i = axis + 1; i < a->shape.size(); ++i) inner *= a->shape[i];
  const std::size_t len = a->shape[axis];
  Shape out_shape = a->shape;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += a->data[(o * len + l) * inner + i];
  return make_result(std::move(out_shape), std::move(out), {a}, [a, outer, inner, len](TensorNode& self) {
    auto& g = a->grad_buf();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t l = 0; l < len; ++l)
        for (std::size_t i = 0; i < inner; ++i) g[(o * len + l) * inner + i] += self.grad[o * inner + i];
  });
}

Tensor mean_axis(const Tensor& a, std::size_t axis) {
  const std::size_t len = a.dim(axis);
  if (len == 0) throw ShapeError("mean_axis over an empty axis");
  return scale(sum_axis(a, axis), 1.0 / static_cast<double>(len));
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& ta, const Tensor& tb) {
  const NodePtr& a = node_of(ta);
  const NodePtr& b = node_of(tb);
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0]) {
    throw ShapeError("matmul: cannot multiply " + shape_str(a->shape) + " by " + shape_str(b->shape));
  }
  const std::size_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a->data[i * k + p];
      const double* brow = b->data.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  return make_result({m, n}, std::move(out), {a, b}, [a, b, m, k, n](TensorNode& self) {
    const double* g = self.grad.data();
    if (a->requires_grad) {
      auto& ga = a->grad_buf();  // g . b^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * b->data[p * n + j];
          ga[i * k + p] += s;
        }
    }
    if (b->requires_grad) {
      auto& gb = b->grad_buf();  // a^T . g
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = a->data[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
        }
    }
  });
}

Tensor node_mix(const Tensor& tm, const Tensor& tx) {
  const NodePtr& m = node_of(tm);
  const NodePtr& x = node_of(tx);
  const bool batched = x->shape.size() == 3;
  if (m->shape.size() != 2 || m->shape[0] != m->shape[1] || (x->shape.size() != 2 && !batched) ||
      x->shape[batched ? 1 : 0] != m->shape[0]) {
    throw ShapeError("node_mix: operator " + shape_str(m->shape) + " does not fit features " +
                     shape_str(x->shape));
  }
  const std::size_t groups = batched ? x->shape[0] : 1;
  const std::size_t n = m->shape[0];
  const std::size_t c = x->shape.back();
  std::vector<double> out(x->data.size(), 0.0);
  for (std::size_t g = 0; g < groups; ++g) {
    const double* xg = x->data.data() + g * n * c;
    double* yg = out.data() + g * n * c;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double mij = m->data[i * n + j];
        if (mij == 0.0) continue;
        for (std::size_t ch = 0; ch < c; ++ch) yg[i * c + ch] += mij * xg[j * c + ch];
      }
  }
  return make_result(x->shape, std::move(out), {m, x}, [m, x, groups, n, c](TensorNode& self) {
    for (std::size_t g = 0; g < groups; ++g) {
      const double* xg = x->data.data() + g * n * c;
      const double* gy = self.grad.data() + g * n * c;
      if (m->requires_grad) {
        auto& gm = m->grad_buf();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) s += gy[i * c + ch] * xg[j * c + ch];
            gm[i * n + j] += s;
          }
      }
      if (x->requires_grad) {
        double* gx = x->grad_buf().data() + g * n * c;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const double mij = m->data[i * n + j];
            for (std::size_t ch = 0; ch < c; ++ch) gx[j * c + ch] += mij * gy[i * c + ch];
          }
      }
    }
  });
}

Tensor temporal_conv(const Tensor& tx, const Tensor& tw, std::size_t pad) {
  const NodePtr& x = node_of(tx);
  const NodePtr& w = node_of(tw);
  if (x->shape.size() != 4 || w->shape.size() != 3 || w->shape[1] != x->shape[3]) {
    throw ShapeError("temporal_conv: kernel " + shape_str(w->shape) + " does not fit input " +
                     shape_str(x->shape));
  }
  const std::size_t batch = x->shape[0], steps = x->shape[1], nodes = x->shape[2], cin = x->shape[3];
  const std::size_t taps = w->shape[0], cout = w->shape[2];
  if (steps + 2 * pad < taps) throw ShapeError("temporal_conv: kernel longer than padded sequence");
  const std::size_t out_steps = steps + 2 * pad - taps + 1;

  auto source_step = [steps, pad](std::size_t t, std::size_t k) -> std::ptrdiff_t {
    const auto s = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(pad);
    return (s < 0 || s >= static_cast<std::ptrdiff_t>(steps)) ? -1 : s;
  };

  std::vector<double> out(batch * out_steps * nodes * cout, 0.0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < out_steps; ++t)
      for (std::size_t k = 0; k < taps; ++k) {
        const std::ptrdiff_t s = source_step(t, k);
        if (s < 0) continue;
        for (std::size_t nd = 0; nd < nodes; ++nd) {
          const double* xin = x->data.data() + ((b * steps + s) * nodes + nd) * cin;
          double* y = out.data() + ((b * out_steps + t) * nodes + nd) * cout;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double xv = xin[ci];
            const double* wrow = w->data.data() + (k * cin + ci) * cout;
            for (std::size_t co = 0; co < cout; ++co) y[co] += xv * wrow[co];
          }
        }
      }

  Shape out_shape{batch, out_steps, nodes, cout};
  return make_result(std::move(out_shape), std::move(out), {x, w},
                     [x, w, batch, steps, nodes, cin, taps, cout, out_steps, source_step](TensorNode& self) {
                       for (std::size_t b = 0; b < batch; ++b)
                         for (std::size_t t = 0; t < out_steps; ++t)
                           for (std::size_t k = 0; k < taps; ++k) {
                             const std::ptrdiff_t s = source_step(t, k);
                             if (s < 0) continue;
                             for (std::size_t nd = 0; nd < nodes; ++nd) {
                               const std::size_t in_off = ((b * steps + s) * nodes + nd) * cin;
                               const double* gy = self.grad.data() + ((b * out_steps + t) * nodes + nd) * cout;
                               for (std::size_t ci = 0; ci < cin; ++ci) {
                                 const std::size_t wrow = (k * cin + ci) * cout;
                                 if (x->requires_grad) {
                                   double acc = 0.0;
                                   for (std::size_t co = 0; co < cout; ++co) acc += w->data[wrow + co] * gy[co];
                                   x->grad_buf()[in_off + ci] += acc;
                                 }
                                 if (w->requires_grad) {
                                   const double xv = x->data[in_off + ci];
                                   auto& gw = w->grad_buf();
                                   for (std::size_t co = 0; co < cout; ++co) gw[wrow + co] += xv * gy[co];
                                 }
                               }
                             }
                           }
                     });
}

// ---------------------------------------------------------------------------
// Shape ops

Tensor reshape(const Tensor& ta, Shape shape) {
  const NodePtr& a = node_of(ta);
  if (shape_numel(shape) != a->data.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(a->shape) + " as " + shape_str(shape));
  }
  return make_result(std::move(shape), a->data, {a}, [a](TensorNode& self) {
    auto& g = a->grad_buf();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of no tensors");
  std::vector<NodePtr> nodes;
  for (const auto& p : parts) nodes.push_back(node_of(p));
  const Shape& ref = nodes.front()->shape;
  if (axis >= ref.size()) throw ShapeError("concat: axis out of range for " + shape_str(ref));
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& n : nodes) {
    bool ok = n->shape.size() == ref.size();
    for (std::size_t i = 0; ok && i < ref.size(); ++i) ok = i == axis || n->shape[i] == ref[i];
    if (!ok) throw ShapeError("concat: " + shape_str(n->shape) + " does not match " + shape_str(ref));
    out_shape[axis] += n->shape[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= ref[i];
  for (std::size_t i = axis + 1; i < ref.size(); ++i) inner *= ref[i];
  const std::size_t total_len = out_shape[axis];

  std::vector<double> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (const auto& n : nodes) {
    const std::size_t len = n->shape[axis];
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(n->data.begin() + static_cast<std::ptrdiff_t>(o * len * inner), len * inner,
                  out.begin() + static_cast<std::ptrdiff_t>((o * total_len + offset) * inner));
    offset += len;
  }
  return make_result(std::move(out_shape), std::move(out), nodes,
                     [nodes, axis, outer, inner, total_len](TensorNode& self) {
                       std::size_t offset = 0;
                       for (const auto& n : nodes) {
                         const std::size_t len = n->shape[axis];
                         if (n->requires_grad) {
                           auto& g = n->grad_buf();
                           for (std::size_t o = 0; o < outer; ++o)
                             for (std::size_t i = 0; i < len * inner; ++i)
                               g[o * len * inner + i] += self.grad[(o * total_len + offset) * inner + i];
                         }
                         offset += len;
                       }
                     });
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
Tensor operator-(const Tensor& a) { return neg(a); }

}  // namespace gmg
