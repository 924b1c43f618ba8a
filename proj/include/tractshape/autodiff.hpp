#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tractshape::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Graph node. Values are float32, row-major. The gradient buffer is
/// allocated (zero-filled) on first accumulation.
struct Node {
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // pushes this->grad into parents
  const char* op = "leaf";

  std::size_t numel() const noexcept { return value.size(); }
  std::vector<float>& grad_buffer();
};

/// Shared handle to a graph node. Copies alias the same node, which is how
/// weight sharing is expressed: two uses of one parameter read and
/// accumulate into the same storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false) { return from({1}, {value}, requires_grad); }

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t numel() const { return node_->numel(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const float> values() const { return node_->value; }
  std::span<float> mutable_values() { return node_->value; }
  float item() const;

  /// Accumulated gradient; zeros when nothing has been accumulated yet.
  std::span<const float> grad() const;
  std::span<float> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad();

  /// Reverse-mode sweep from this tensor, seeding d(self)/d(self) = seed.
  /// Only scalar tensors may use the default seed.
  void backward(float seed = 1.0f) const;

  const Node* node() const noexcept { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// ---------------------------------------------------------------------------
// Ops. Every forward checks its output for NaN/Inf (NonFiniteValue) and its
// operand shapes (ShapeMismatch).

/// (m x k) * (k x n)
Tensor matmul(const Tensor& a, const Tensor& b);
/// x (r x c) plus bias (c) or (1 x c) on every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor relu(const Tensor& x);

struct MaxRowsResult {
  Tensor values;                    // (1 x c)
  std::vector<std::size_t> argmax;  // per column; ties go to the lowest row
};
/// Column-wise max over the rows of x (r x c). Gradient flows only to the argmax rows.
MaxRowsResult max_rows(const Tensor& x);

/// max_rows(relu(x * w + bias)) without materializing the (r x c) activation.
/// Same values, argmax and gradients as the composition; the backward pass
/// touches only the argmax rows.
MaxRowsResult dense_relu_max(const Tensor& x, const Tensor& w, const Tensor& bias);

/// mean((a - b)^2) as a {1} tensor; shapes must match.
Tensor mse(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor add_scalar(const Tensor& a, float s);

/// |DFT(x)| along the last axis, by the direct O(N^2) sum:
/// X_k = sum_n x_n exp(-j 2 pi k n / N). The gradient of |X_k| is taken as 0
/// where X_k = 0.
Tensor dft_magnitude(const Tensor& x);

/// Direct DFT magnitudes in double precision (no graph).
std::vector<double> dft_magnitude_values(std::span<const double> x);

}  // namespace tractshape::ad
