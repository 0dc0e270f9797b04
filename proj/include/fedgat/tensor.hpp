#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fedgat {

class GradTape;

// Dense array of 64-bit floats. The value buffer is immutable once built and
// shared between copies, so Tensors are cheap value types. A Tensor may carry
// a handle onto the GradTape that produced it; operations on taped tensors
// record themselves for reverse-mode differentiation.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor scalar(double v);
  static Tensor row(std::vector<double> values);  // shape 1 x n
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const;
  std::size_t rows() const;  // rank-2 accessors
  std::size_t cols() const;

  const std::vector<double>& values() const;
  double at(std::size_t i) const { return values()[i]; }
  double at(std::size_t r, std::size_t c) const {
    return values()[r * cols() + c];
  }

  bool on_tape() const { return tape_ != nullptr; }
  GradTape* tape() const { return tape_; }
  int node() const { return node_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_str() const;

 private:
  friend class GradTape;
  std::vector<std::size_t> shape_;
  std::shared_ptr<const std::vector<double>> data_;
  GradTape* tape_ = nullptr;
  int node_ = -1;
};

// Differentiable operations. When an input is taped the result is recorded
// with its backward rule; untaped inputs are treated as constants. With no
// taped input these are plain forward evaluations.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softmax_rows(const Tensor& x);
Tensor concat(std::span<const Tensor> parts, int axis);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor cross_entropy(const Tensor& probs, int label);
Tensor gather_rows(const Tensor& x, std::vector<std::size_t> idx);
Tensor reshape(const Tensor& x, std::vector<std::size_t> shape);
Tensor mean_rows(const Tensor& x);
Tensor max_rows(const Tensor& x);
Tensor sum(const Tensor& x);

// Ordered record of operations for reverse-mode differentiation. Nodes are
// appended in execution order, so every node's parents precede it. A tape and
// the tensors recorded on it belong to one logical thread.
class GradTape {
 public:
  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  // Records a leaf whose gradient is retained by backward().
  Tensor parameter(const Tensor& t);
  // Records a constant leaf (no gradient retained).
  Tensor input(const Tensor& t);

  // Accumulates dLoss/dNode for every node reachable from `loss`, which must
  // be a scalar recorded on this tape. May be called again after recording
  // further operations; gradients are reset each call.
  void backward(const Tensor& loss);

  // Gradient of the last backward() target w.r.t. a parameter leaf.
  Tensor grad(const Tensor& parameter_leaf) const;

  std::size_t node_count() const { return nodes_.size(); }

  // --- recording hooks used by the operation library ---
  using BackwardFn = std::function<void(GradTape&, int)>;
  int ensure_recorded(const Tensor& t);
  Tensor adopt(const Tensor& out, std::vector<int> parents, BackwardFn fn);
  bool wants_grad(int id) const { return nodes_[id].needs_grad; }
  const std::vector<double>& node_values(int id) const {
    return *nodes_[id].data;
  }
  const std::vector<double>& grad_values(int id) const { return grads_[id]; }
  std::vector<double>& grad_buffer(int id);

 private:
  struct Node {
    std::vector<std::size_t> shape;
    std::shared_ptr<const std::vector<double>> data;
    std::vector<int> parents;
    BackwardFn backward;  // empty for leaves
    bool is_param = false;
    bool needs_grad = false;
  };

  Tensor record_leaf(const Tensor& t, bool is_param);

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
};

}  // namespace fedgat
