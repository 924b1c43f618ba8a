#include "tractshape/autodiff.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <unordered_set>

#include <Eigen/Dense>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "tractshape/error.hpp"

namespace tractshape::ad {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;
using ConstMapMatrix = Eigen::Map<const RowMatrix>;

ConstMapMatrix view(const std::vector<float>& v, std::size_t rows, std::size_t cols) {
  return {v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}
MapMatrix view(std::vector<float>& v, std::size_t rows, std::size_t cols) {
  return {v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": " + detail);
}

// Large activations would otherwise be mmap-ed and page-faulted on every
// forward pass.
[[maybe_unused]] const bool kAllocatorTuned = [] {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  return true;
}();

void check_finite(const Node& n) {
  // Exponent bits all set means Inf or NaN; the branch-free scan vectorizes.
  const float* v = n.value.data();
  const std::size_t size = n.value.size();
  std::uint32_t bad = 0;
  for (std::size_t i = 0; i < size; ++i) bad |= (std::bit_cast<std::uint32_t>(v[i]) & 0x7f800000u) == 0x7f800000u;
  if (bad == 0) return;
  for (std::size_t i = 0; i < size; ++i) {
    if (!std::isfinite(v[i])) {
      throw Error(ErrorCode::NonFiniteValue,
                  std::string(n.op) + " produced a non-finite value at flat index " + std::to_string(i));
    }
  }
}

bool any_requires_grad(std::initializer_list<const Tensor*> inputs) {
  for (const auto* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Output node wired to its parents when gradients are needed.
std::shared_ptr<Node> make_output(const char* op, Shape shape, std::initializer_list<const Tensor*> inputs) {
  auto out = std::make_shared<Node>();
  out->op = op;
  out->shape = std::move(shape);
  out->value.assign(shape_numel(out->shape), 0.0f);
  out->requires_grad = any_requires_grad(inputs);
  if (out->requires_grad) {
    for (const auto* t : inputs) out->parents.push_back(t->node_ptr());
  }
  return out;
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) shape_error(op, "expected a rank-2 tensor, got " + shape_string(t.shape()));
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (const auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

std::vector<float>& Node::grad_buffer() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0f);
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return from(shape, std::vector<float>(shape_numel(shape), 0.0f), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
  if (shape.empty()) shape_error("tensor", "shape must have at least one dimension");
  for (const auto d : shape) {
    if (d == 0) shape_error("tensor", "dimensions must be positive, got " + shape_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    shape_error("tensor", shape_string(shape) + " does not hold " + std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  check_finite(*node);
  return Tensor(std::move(node));
}

std::size_t Tensor::rows() const { return rank() == 1 ? 1 : node_->shape[0]; }
std::size_t Tensor::cols() const { return node_->shape.back(); }

float Tensor::item() const {
  if (numel() != 1) shape_error("item", "tensor of shape " + shape_string(shape()) + " is not a scalar");
  return node_->value[0];
}

std::span<const float> Tensor::grad() const {
  return node_->grad_buffer();
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0f); }

void Tensor::backward(float seed) const {
  if (numel() != 1) shape_error("backward", "needs a scalar output, got " + shape_string(shape()));
  if (!requires_grad()) return;

  // Iterative post-order DFS -> topological order.
  std::vector<Node*> order;
  std::unordered_set<const Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    shape_error("matmul", shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  auto out = make_output("matmul", {m, n}, {&a, &b});
  view(out->value, m, n).noalias() = view(a.node()->value, m, k) * view(b.node()->value, k, n);
  check_finite(*out);

  if (out->requires_grad) {
    out->backward = [m, k, n](Node& self) {
      Node& A = *self.parents[0];
      Node& B = *self.parents[1];
      const auto dC = view(self.grad, m, n);

      // Upstream gradients below a max-pool are row-sparse; only the nonzero
      // rows contribute, so gather them before multiplying.
      std::vector<Eigen::Index> live;
      live.reserve(m);
      for (std::size_t r = 0; r < m; ++r) {
        if (!dC.row(static_cast<Eigen::Index>(r)).isZero(0.0f)) live.push_back(static_cast<Eigen::Index>(r));
      }
      if (live.empty()) return;
      const auto Bv = view(B.value, k, n);
      const auto Av = view(A.value, m, k);

      if (live.size() * 2 >= m) {
        if (A.requires_grad) view(A.grad_buffer(), m, k).noalias() += dC * Bv.transpose();
        if (B.requires_grad) view(B.grad_buffer(), k, n).noalias() += Av.transpose() * dC;
        return;
      }
      const auto live_n = static_cast<Eigen::Index>(live.size());
      RowMatrix dC_live(live_n, static_cast<Eigen::Index>(n));
      for (Eigen::Index i = 0; i < live_n; ++i) dC_live.row(i) = dC.row(live[static_cast<std::size_t>(i)]);
      if (A.requires_grad) {
        RowMatrix dA_live = dC_live * Bv.transpose();
        auto dA = view(A.grad_buffer(), m, k);
        for (Eigen::Index i = 0; i < live_n; ++i) dA.row(live[static_cast<std::size_t>(i)]) += dA_live.row(i);
      }
      if (B.requires_grad) {
        RowMatrix A_live(live_n, static_cast<Eigen::Index>(k));
        for (Eigen::Index i = 0; i < live_n; ++i) A_live.row(i) = Av.row(live[static_cast<std::size_t>(i)]);
        view(B.grad_buffer(), k, n).noalias() += A_live.transpose() * dC_live;
      }
    };
  }
  return Tensor(out);
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank2(x, "add_bias");
  const std::size_t r = x.rows(), c = x.cols();
  if (bias.numel() != c || (bias.rank() == 2 && bias.rows() != 1) || bias.rank() > 2) {
    shape_error("add_bias", shape_string(x.shape()) + " + bias " + shape_string(bias.shape()));
  }
  auto out = make_output("add_bias", {r, c}, {&x, &bias});
  const Eigen::Map<const Eigen::RowVectorXf> bv(bias.values().data(), static_cast<Eigen::Index>(c));
  view(out->value, r, c).noalias() = view(x.node()->value, r, c).rowwise() + bv;
  check_finite(*out);

  if (out->requires_grad) {
    out->backward = [r, c](Node& self) {
      Node& X = *self.parents[0];
      Node& Bn = *self.parents[1];
      const float* g = self.grad.data();
      if (X.requires_grad) view(X.grad_buffer(), r, c) += view(self.grad, r, c);
      if (Bn.requires_grad) {
        std::vector<double> acc(c, 0.0);
        for (std::size_t i = 0; i < r; ++i) {
          const float* row = g + i * c;
          bool any = false;
          for (std::size_t j = 0; j < c && !any; ++j) any = row[j] != 0.0f;
          if (!any) continue;
          for (std::size_t j = 0; j < c; ++j) acc[j] += row[j];
        }
        auto& db = Bn.grad_buffer();
        for (std::size_t j = 0; j < c; ++j) db[j] += static_cast<float>(acc[j]);
      }
    };
  }
  return Tensor(out);
}

Tensor relu(const Tensor& x) {
  auto out = make_output("relu", x.shape(), {&x});
  const auto n = static_cast<Eigen::Index>(out->value.size());
  Eigen::Map<Eigen::ArrayXf> ov(out->value.data(), n);
  ov = Eigen::Map<const Eigen::ArrayXf>(x.values().data(), n).max(0.0f);
  check_finite(*out);
  if (out->requires_grad) {
    out->backward = [n](Node& self) {
      Eigen::Map<Eigen::ArrayXf> dx(self.parents[0]->grad_buffer().data(), n);
      const Eigen::Map<const Eigen::ArrayXf> y(self.value.data(), n);
      const Eigen::Map<const Eigen::ArrayXf> g(self.grad.data(), n);
      dx += (y > 0.0f).select(g, 0.0f);
    };
  }
  return Tensor(out);
}

MaxRowsResult max_rows(const Tensor& x) {
  require_rank2(x, "max_rows");
  const std::size_t r = x.rows(), c = x.cols();
  auto out = make_output("max_rows", {1, c}, {&x});
  std::vector<std::size_t> argmax(c, 0);
  const float* __restrict xv = x.values().data();
  float* __restrict mv = out->value.data();
  for (std::size_t j = 0; j < c; ++j) mv[j] = xv[j];
  for (std::size_t i = 1; i < r; ++i) {
    const float* row = xv + i * c;
    for (std::size_t j = 0; j < c; ++j) mv[j] = std::max(mv[j], row[j]);
  }
  // First row reaching the maximum; the ones already found drop out.
  std::vector<std::size_t> pending(c);
  for (std::size_t j = 0; j < c; ++j) pending[j] = j;
  for (std::size_t i = 0; i < r && !pending.empty(); ++i) {
    const float* row = xv + i * c;
    std::size_t keep = 0;
    for (const std::size_t j : pending) {
      if (row[j] == mv[j]) {
        argmax[j] = i;
      } else {
        pending[keep++] = j;
      }
    }
    pending.resize(keep);
  }
  check_finite(*out);
  if (out->requires_grad) {
    out->backward = [c, argmax](Node& self) {
      auto& dx = self.parents[0]->grad_buffer();
      for (std::size_t j = 0; j < c; ++j) dx[argmax[j] * c + j] += self.grad[j];
    };
  }
  return {Tensor(out), std::move(argmax)};
}

MaxRowsResult dense_relu_max(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank2(x, "dense_relu_max");
  require_rank2(w, "dense_relu_max");
  const std::size_t m = x.rows(), k = x.cols(), n = w.cols();
  if (w.rows() != k || bias.numel() != n || bias.rank() > 2 || (bias.rank() == 2 && bias.rows() != 1)) {
    shape_error("dense_relu_max", shape_string(x.shape()) + " x " + shape_string(w.shape()) + " + bias " +
                                      shape_string(bias.shape()));
  }
  auto out = make_output("dense_relu_max", {1, n}, {&x, &w, &bias});

  constexpr std::size_t kBlock = 64;
  std::vector<float> best(n, -std::numeric_limits<float>::infinity());
  std::vector<std::int32_t> arg(n, 0);
  RowMatrix z(static_cast<Eigen::Index>(std::min(kBlock, m)), static_cast<Eigen::Index>(n));
  const Eigen::Map<const Eigen::RowVectorXf> bv(bias.values().data(), static_cast<Eigen::Index>(n));
  const auto xv = view(x.node()->value, m, k);
  const auto wv = view(w.node()->value, k, n);
  for (std::size_t r0 = 0; r0 < m; r0 += kBlock) {
    const auto rows = static_cast<Eigen::Index>(std::min(kBlock, m - r0));
    auto zb = z.topRows(rows);
    zb.noalias() = xv.middleRows(static_cast<Eigen::Index>(r0), rows) * wv;
    zb.rowwise() += bv;
    std::uint32_t bad = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      const float* __restrict row = zb.row(i).data();
      float* __restrict bp = best.data();
      std::int32_t* __restrict ap = arg.data();
      const auto idx = static_cast<std::int32_t>(r0) + static_cast<std::int32_t>(i);
      for (std::size_t j = 0; j < n; ++j) {
        const float v = row[j];
        bad |= (std::bit_cast<std::uint32_t>(v) & 0x7f800000u) == 0x7f800000u;
        const bool gt = v > bp[j];
        bp[j] = gt ? v : bp[j];
        ap[j] = gt ? idx : ap[j];
      }
    }
    if (bad != 0) {
      throw Error(ErrorCode::NonFiniteValue, "dense_relu_max produced a non-finite pre-activation in rows " +
                                                 std::to_string(r0) + ".." + std::to_string(r0 + static_cast<std::size_t>(rows) - 1));
    }
  }
  // Where the column maximum is not positive every relu output is 0 and the
  // tie resolves to row 0, as in max_rows(relu(.)).
  std::vector<std::size_t> argmax(n);
  for (std::size_t j = 0; j < n; ++j) {
    const bool active = best[j] > 0.0f;
    out->value[j] = active ? best[j] : 0.0f;
    argmax[j] = active ? static_cast<std::size_t>(arg[j]) : 0;
  }
  check_finite(*out);

  if (out->requires_grad) {
    out->backward = [k, n, argmax](Node& self) {
      Node& X = *self.parents[0];
      Node& W = *self.parents[1];
      Node& Bn = *self.parents[2];
      const float* g = self.grad.data();
      std::vector<std::size_t> live;
      live.reserve(n);
      for (std::size_t j = 0; j < n; ++j) {
        if (self.value[j] > 0.0f && g[j] != 0.0f) live.push_back(j);
      }
      if (live.empty()) return;
      if (Bn.requires_grad) {
        auto& db = Bn.grad_buffer();
        for (const std::size_t j : live) db[j] += g[j];
      }
      if (W.requires_grad) {
        auto& dw = W.grad_buffer();
        const float* xv = X.value.data();
        for (std::size_t kk = 0; kk < k; ++kk) {
          float* drow = dw.data() + kk * n;
          for (const std::size_t j : live) drow[j] += g[j] * xv[argmax[j] * k + kk];
        }
      }
      if (X.requires_grad) {
        auto& dx = X.grad_buffer();
        const float* wv = W.value.data();
        for (const std::size_t j : live) {
          float* drow = dx.data() + argmax[j] * k;
          for (std::size_t kk = 0; kk < k; ++kk) drow[kk] += g[j] * wv[kk * n + j];
        }
      }
    };
  }
  return {Tensor(out), std::move(argmax)};
}

Tensor mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mse", shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  auto out = make_output("mse", {1}, {&a, &b});
  const std::size_t n = a.numel();
  const float* av = a.values().data();
  const float* bv = b.values().data();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(av[i]) - static_cast<double>(bv[i]);
    acc += d * d;
  }
  out->value[0] = static_cast<float>(acc / static_cast<double>(n));
  check_finite(*out);
  if (out->requires_grad) {
    out->backward = [n](Node& self) {
      Node& A = *self.parents[0];
      Node& B = *self.parents[1];
      const double g = 2.0 * static_cast<double>(self.grad[0]) / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(A.value[i]) - static_cast<double>(B.value[i]);
        if (A.requires_grad) A.grad_buffer()[i] += static_cast<float>(g * d);
        if (B.requires_grad) B.grad_buffer()[i] -= static_cast<float>(g * d);
      }
    };
  }
  return Tensor(out);
}

namespace {

Tensor add_scaled(const Tensor& a, const Tensor& b, float sign, const char* op) {
  if (a.shape() != b.shape()) shape_error(op, shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  auto out = make_output(op, a.shape(), {&a, &b});
  const float* av = a.values().data();
  const float* bv = b.values().data();
  for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = av[i] + sign * bv[i];
  check_finite(*out);
  if (out->requires_grad) {
    out->backward = [sign](Node& self) {
      Node& A = *self.parents[0];
      Node& B = *self.parents[1];
      if (A.requires_grad) {
        auto& da = A.grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) da[i] += self.grad[i];
      }
      if (B.requires_grad) {
        auto& db = B.grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) db[i] += sign * self.grad[i];
      }
    };
  }
  return Tensor(out);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_scaled(a, b, 1.0f, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_scaled(a, b, -1.0f, "sub"); }

Tensor scale(const Tensor& a, float s) {
  auto out = make_output("scale", a.shape(), {&a});
  const float* av = a.values().data();
  for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = s * av[i];
  check_finite(*out);
  if (out->requires_grad) {
    out->backward = [s](Node& self) {
      auto& da = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) da[i] += s * self.grad[i];
    };
  }
  return Tensor(out);
}

Tensor add_scalar(const Tensor& a, float s) {
  auto out = make_output("add_scalar", a.shape(), {&a});
  const float* av = a.values().data();
  for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = av[i] + s;
  check_finite(*out);
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      auto& da = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) da[i] += self.grad[i];
    };
  }
  return Tensor(out);
}

namespace {

struct DftTables {
  std::vector<double> cos_table;  // [k * N + n]
  std::vector<double> sin_table;
};

DftTables dft_tables(std::size_t n) {
  DftTables t;
  t.cos_table.resize(n * n);
  t.sin_table.resize(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      // Reduce k*j mod N first so the angle stays in [0, 2pi).
      const double angle = 2.0 * std::numbers::pi * static_cast<double>((k * j) % n) / static_cast<double>(n);
      t.cos_table[k * n + j] = std::cos(angle);
      t.sin_table[k * n + j] = std::sin(angle);
    }
  }
  return t;
}

}  // namespace

std::vector<double> dft_magnitude_values(std::span<const double> x) {
  const std::size_t n = x.size();
  const auto t = dft_tables(n);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      re += x[j] * t.cos_table[k * n + j];
      im -= x[j] * t.sin_table[k * n + j];
    }
    out[k] = std::hypot(re, im);
  }
  return out;
}

Tensor dft_magnitude(const Tensor& x) {
  if (x.rank() > 2) shape_error("dft_magnitude", "expected rank 1 or 2, got " + shape_string(x.shape()));
  const std::size_t rows = x.rows(), n = x.cols();
  auto out = make_output("dft_magnitude", x.shape(), {&x});
  auto tables = std::make_shared<DftTables>(dft_tables(n));
  // Keep re/im per output element for the backward pass.
  auto spectrum = std::make_shared<std::vector<double>>(2 * rows * n);
  const float* xv = x.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < n; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        re += static_cast<double>(xv[r * n + j]) * tables->cos_table[k * n + j];
        im -= static_cast<double>(xv[r * n + j]) * tables->sin_table[k * n + j];
      }
      (*spectrum)[2 * (r * n + k)] = re;
      (*spectrum)[2 * (r * n + k) + 1] = im;
      out->value[r * n + k] = static_cast<float>(std::hypot(re, im));
    }
  }
  check_finite(*out);
  if (out->requires_grad) {
    out->backward = [rows, n, tables, spectrum](Node& self) {
      auto& dx = self.parents[0]->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = 0; k < n; ++k) {
          const double re = (*spectrum)[2 * (r * n + k)];
          const double im = (*spectrum)[2 * (r * n + k) + 1];
          const double mag = std::hypot(re, im);
          const double g = self.grad[r * n + k];
          if (mag == 0.0 || g == 0.0) continue;
          // d|X_k|/dx_j = (re * cos - im * sin) / |X_k|
          for (std::size_t j = 0; j < n; ++j) {
            const double d = (re * tables->cos_table[k * n + j] - im * tables->sin_table[k * n + j]) / mag;
            dx[r * n + j] += static_cast<float>(g * d);
          }
        }
      }
    };
  }
  return Tensor(out);
}

}  // namespace tractshape::ad
