#include "fedgat/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace fedgat {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

constexpr double kProbFloor = 1e-12;  // -log clamp in cross_entropy

// Resolves the tape shared by a set of operands; throws if they disagree.
GradTape* common_tape(std::initializer_list<const Tensor*> ts) {
  GradTape* tape = nullptr;
  for (const Tensor* t : ts) {
    if (!t->on_tape()) continue;
    if (tape == nullptr) {
      tape = t->tape();
    } else if (tape != t->tape()) {
      throw std::logic_error("operands recorded on different gradient tapes");
    }
  }
  return tape;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)),
      data_(std::make_shared<const std::vector<double>>(std::move(values))) {
  if (shape_product(shape_) != data_->size()) {
    throw std::invalid_argument("tensor shape " + shape_str() +
                                " does not match value count " +
                                std::to_string(data_->size()));
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::row(std::vector<double> values) {
  std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::size() const { return data_ ? data_->size() : 0; }

std::size_t Tensor::rows() const {
  if (rank() != 2) throw std::logic_error("rows() on tensor of rank " + std::to_string(rank()));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw std::logic_error("cols() on tensor of rank " + std::to_string(rank()));
  return shape_[1];
}

const std::vector<double>& Tensor::values() const {
  static const std::vector<double> empty;
  return data_ ? *data_ : empty;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << "x";
    os << shape_[i];
  }
  os << "]";
  return os.str();
}

// ---------------------------------------------------------------------------
// GradTape

Tensor GradTape::record_leaf(const Tensor& t, bool is_param) {
  if (t.on_tape()) {
    throw std::logic_error("tensor is already recorded on a tape");
  }
  Node node;
  node.shape = t.shape();
  node.data = t.data_;
  node.is_param = is_param;
  node.needs_grad = is_param;
  nodes_.push_back(std::move(node));

  Tensor out = t;
  out.tape_ = this;
  out.node_ = static_cast<int>(nodes_.size()) - 1;
  return out;
}

Tensor GradTape::parameter(const Tensor& t) { return record_leaf(t, true); }

Tensor GradTape::input(const Tensor& t) { return record_leaf(t, false); }

int GradTape::ensure_recorded(const Tensor& t) {
  if (t.on_tape()) {
    if (t.tape() != this) {
      throw std::logic_error("tensor belongs to a different tape");
    }
    return t.node();
  }
  Node node;
  node.shape = t.shape();
  node.data = t.data_;
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor GradTape::adopt(const Tensor& out, std::vector<int> parents,
                       BackwardFn fn) {
  Node node;
  node.shape = out.shape();
  node.data = out.data_;
  node.parents = std::move(parents);
  node.backward = std::move(fn);
  for (int p : node.parents) node.needs_grad |= nodes_[p].needs_grad;
  nodes_.push_back(std::move(node));

  Tensor taped = out;
  taped.tape_ = this;
  taped.node_ = static_cast<int>(nodes_.size()) - 1;
  return taped;
}

std::vector<double>& GradTape::grad_buffer(int id) {
  if (grads_[id].empty()) {
    grads_[id].assign(nodes_[id].data->size(), 0.0);
  }
  return grads_[id];
}

void GradTape::backward(const Tensor& loss) {
  if (!loss.on_tape() || loss.tape() != this) {
    throw std::invalid_argument("backward: loss is not recorded on this tape");
  }
  if (loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                loss.shape_str());
  }
  grads_.assign(nodes_.size(), {});
  grad_buffer(loss.node())[0] = 1.0;
  for (int i = loss.node(); i >= 0; --i) {
    const Node& node = nodes_[i];
    if (!node.backward || grads_[i].empty() || !node.needs_grad) continue;
    node.backward(*this, i);
  }
}

Tensor GradTape::grad(const Tensor& parameter_leaf) const {
  if (!parameter_leaf.on_tape() || parameter_leaf.tape() != this) {
    throw std::invalid_argument("grad: tensor is not recorded on this tape");
  }
  int id = parameter_leaf.node();
  if (!nodes_[id].is_param) {
    throw std::invalid_argument("grad: tensor is not a parameter leaf");
  }
  if (grads_.empty()) {
    throw std::logic_error("grad: backward() has not run on this tape");
  }
  if (grads_[id].empty()) {
    return Tensor::zeros(nodes_[id].shape);
  }
  return Tensor(nodes_[id].shape, grads_[id]);
}

// ---------------------------------------------------------------------------
// Operations

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: incompatible shapes " +
                                a.shape_str() + " x " + b.shape_str());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* oi = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;  // feature rows are mostly zeros
      const double* bp = &bv[p * n];
      for (std::size_t j = 0; j < n; ++j) oi[j] += aip * bp[j];
    }
  }
  Tensor result({m, n}, std::move(out));

  GradTape* tape = common_tape({&a, &b});
  if (!tape) return result;
  const int pa = tape->ensure_recorded(a);
  const int pb = tape->ensure_recorded(b);
  return tape->adopt(result, {pa, pb}, [m, k, n, pa, pb](GradTape& t, int self) {
    const auto& g = t.grad_values(self);
    if (t.wants_grad(pa)) {
      const auto& bv = t.node_values(pb);
      auto& ga = t.grad_buffer(pa);
      // dA[i,p] = sum_j g[i,j] * B[p,j]
      for (std::size_t i = 0; i < m; ++i) {
        const double* gi = &g[i * n];
        for (std::size_t p = 0; p < k; ++p) {
          const double* bp = &bv[p * n];
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += gi[j] * bp[j];
          ga[i * k + p] += s;
        }
      }
    }
    if (t.wants_grad(pb)) {
      const auto& av = t.node_values(pa);
      auto& gb = t.grad_buffer(pb);
      // dB[p,j] = sum_i A[i,p] * g[i,j]
      for (std::size_t i = 0; i < m; ++i) {
        const double* gi = &g[i * n];
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          if (aip == 0.0) continue;
          double* gbp = &gb[p * n];
          for (std::size_t j = 0; j < n; ++j) gbp[j] += aip * gi[j];
        }
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("add: shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
  }
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  Tensor result(a.shape(), std::move(out));

  GradTape* tape = common_tape({&a, &b});
  if (!tape) return result;
  const int pa = tape->ensure_recorded(a);
  const int pb = tape->ensure_recorded(b);
  return tape->adopt(result, {pa, pb}, [pa, pb](GradTape& t, int self) {
    const auto& g = t.grad_values(self);
    for (int p : {pa, pb}) {
      if (!t.wants_grad(p)) continue;
      auto& gp = t.grad_buffer(p);
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("mul: shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
  }
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Tensor result(a.shape(), std::move(out));

  GradTape* tape = common_tape({&a, &b});
  if (!tape) return result;
  const int pa = tape->ensure_recorded(a);
  const int pb = tape->ensure_recorded(b);
  return tape->adopt(result, {pa, pb}, [pa, pb](GradTape& t, int self) {
    const auto& g = t.grad_values(self);
    if (t.wants_grad(pa)) {
      const auto& bv = t.node_values(pb);
      auto& ga = t.grad_buffer(pa);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.wants_grad(pb)) {
      const auto& av = t.node_values(pa);
      auto& gb = t.grad_buffer(pb);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * xv[i];
  Tensor result(x.shape(), std::move(out));

  GradTape* tape = x.tape();
  if (!tape) return result;
  const int px = x.node();
  return tape->adopt(result, {px}, [px, factor](GradTape& t, int self) {
    if (!t.wants_grad(px)) return;
    const auto& g = t.grad_values(self);
    auto& gx = t.grad_buffer(px);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
  });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  if (!(slope >= 0.0 && slope < 1.0)) {
    throw std::invalid_argument("leaky_relu: slope must lie in [0,1), got " +
                                std::to_string(slope));
  }
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = xv[i] > 0.0 ? xv[i] : slope * xv[i];
  }
  Tensor result(x.shape(), std::move(out));

  GradTape* tape = x.tape();
  if (!tape) return result;
  const int px = x.node();
  return tape->adopt(result, {px}, [px, slope](GradTape& t, int self) {
    if (!t.wants_grad(px)) return;
    const auto& g = t.grad_values(self);
    const auto& xv = t.node_values(px);
    auto& gx = t.grad_buffer(px);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx[i] += g[i] * (xv[i] > 0.0 ? 1.0 : slope);
    }
  });
}

Tensor relu(const Tensor& x) { return leaky_relu(x, 0.0); }

Tensor sigmoid(const Tensor& x) {
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = xv[i];
    // branch on sign so exp never overflows
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                      : std::exp(v) / (1.0 + std::exp(v));
  }
  Tensor result(x.shape(), std::move(out));

  GradTape* tape = x.tape();
  if (!tape) return result;
  const int px = x.node();
  return tape->adopt(result, {px}, [px](GradTape& t, int self) {
    if (!t.wants_grad(px)) return;
    const auto& g = t.grad_values(self);
    const auto& y = t.node_values(self);
    auto& gx = t.grad_buffer(px);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx[i] += g[i] * y[i] * (1.0 - y[i]);
    }
  });
}

Tensor softmax_rows(const Tensor& x) {
  if (x.rank() != 2) {
    throw std::invalid_argument("softmax_rows: expected rank-2 tensor, got " +
                                x.shape_str());
  }
  const std::size_t m = x.rows(), n = x.cols();
  const auto& xv = x.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = &xv[i * n];
    double* oi = &out[i * n];
    double mx = xi[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xi[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      oi[j] = std::exp(xi[j] - mx);
      denom += oi[j];
    }
    for (std::size_t j = 0; j < n; ++j) oi[j] /= denom;
  }
  Tensor result(x.shape(), std::move(out));

  GradTape* tape = x.tape();
  if (!tape) return result;
  const int px = x.node();
  return tape->adopt(result, {px}, [px, m, n](GradTape& t, int self) {
    if (!t.wants_grad(px)) return;
    const auto& g = t.grad_values(self);
    const auto& y = t.node_values(self);
    auto& gx = t.grad_buffer(px);
    // dX_row = y ∘ (g - <g, y>)
    for (std::size_t i = 0; i < m; ++i) {
      const double* gi = &g[i * n];
      const double* yi = &y[i * n];
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += gi[j] * yi[j];
      for (std::size_t j = 0; j < n; ++j) {
        gx[i * n + j] += yi[j] * (gi[j] - dot);
      }
    }
  });
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no parts");
  if (axis != 0 && axis != 1) {
    throw std::invalid_argument("concat: axis must be 0 or 1");
  }
  const std::size_t other = axis == 0 ? 1 : 0;
  if (parts[0].rank() != 2) {
    throw std::invalid_argument("concat: part 0 has rank " +
                                std::to_string(parts[0].rank()) +
                                ", expected 2");
  }
  const std::size_t fixed = parts[0].shape()[other];
  std::size_t along = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].rank() != 2 || parts[i].shape()[other] != fixed) {
      throw std::invalid_argument(
          "concat: part " + std::to_string(i) + " has shape " +
          parts[i].shape_str() + ", expected dimension " +
          std::to_string(fixed) + " along axis " + std::to_string(other));
    }
    along += parts[i].shape()[static_cast<std::size_t>(axis)];
  }

  const std::size_t out_rows = axis == 0 ? along : fixed;
  const std::size_t out_cols = axis == 0 ? fixed : along;
  std::vector<double> out(out_rows * out_cols);
  std::size_t offset = 0;  // row or column offset along the concat axis
  for (const Tensor& part : parts) {
    const auto& pv = part.values();
    const std::size_t pr = part.rows(), pc = part.cols();
    if (axis == 0) {
      std::copy(pv.begin(), pv.end(), out.begin() + offset * out_cols);
      offset += pr;
    } else {
      for (std::size_t r = 0; r < pr; ++r) {
        std::copy(&pv[r * pc], &pv[r * pc] + pc, &out[r * out_cols + offset]);
      }
      offset += pc;
    }
  }
  Tensor result({out_rows, out_cols}, std::move(out));

  GradTape* tape = nullptr;
  for (const Tensor& part : parts) {
    GradTape* pt = common_tape({&part});
    if (pt && tape && pt != tape) {
      throw std::logic_error("concat: parts recorded on different tapes");
    }
    if (pt) tape = pt;
  }
  if (!tape) return result;

  std::vector<int> parents;
  std::vector<std::size_t> sizes;  // extent of each part along the axis
  parents.reserve(parts.size());
  for (const Tensor& part : parts) {
    parents.push_back(tape->ensure_recorded(part));
    sizes.push_back(part.shape()[static_cast<std::size_t>(axis)]);
  }
  std::vector<int> parents_copy = parents;
  return tape->adopt(
      result, std::move(parents),
      [ps = std::move(parents_copy), sizes, axis, out_cols](GradTape& t,
                                                            int self) {
        const auto& g = t.grad_values(self);
        std::size_t offset = 0;
        for (std::size_t i = 0; i < ps.size(); ++i) {
          const std::size_t extent = sizes[i];
          if (t.wants_grad(ps[i])) {
            auto& gp = t.grad_buffer(ps[i]);
            if (axis == 0) {
              for (std::size_t j = 0; j < gp.size(); ++j) {
                gp[j] += g[offset * out_cols + j];
              }
            } else {
              const std::size_t pr = gp.size() / extent;
              for (std::size_t r = 0; r < pr; ++r) {
                for (std::size_t c = 0; c < extent; ++c) {
                  gp[r * extent + c] += g[r * out_cols + offset + c];
                }
              }
            }
          }
          offset += extent;
        }
      });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  return concat(std::span<const Tensor>(parts.data(), parts.size()), axis);
}

Tensor cross_entropy(const Tensor& probs, int label) {
  if (probs.rank() != 2 || probs.rows() != 1) {
    throw std::invalid_argument("cross_entropy: expected a 1xN row, got " +
                                probs.shape_str());
  }
  const std::size_t n = probs.cols();
  if (label < 0 || static_cast<std::size_t>(label) >= n) {
    throw std::invalid_argument("cross_entropy: label " +
                                std::to_string(label) + " out of range [0," +
                                std::to_string(n) + ")");
  }
  const auto& pv = probs.values();
  double total = std::accumulate(pv.begin(), pv.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-3) {
    throw std::invalid_argument("cross_entropy: probabilities sum to " +
                                std::to_string(total));
  }
  const double p = pv[static_cast<std::size_t>(label)];
  Tensor result({1}, {-std::log(std::max(p, kProbFloor))});

  GradTape* tape = probs.tape();
  if (!tape) return result;
  const int pp = probs.node();
  return tape->adopt(result, {pp}, [pp, label](GradTape& t, int self) {
    if (!t.wants_grad(pp)) return;
    const double g = t.grad_values(self)[0];
    const double p = t.node_values(pp)[static_cast<std::size_t>(label)];
    auto& gp = t.grad_buffer(pp);
    if (p > kProbFloor) gp[static_cast<std::size_t>(label)] += -g / p;
    // below the floor the forward value is constant, so the gradient is 0
  });
}

Tensor gather_rows(const Tensor& x, std::vector<std::size_t> idx) {
  if (x.rank() != 2) {
    throw std::invalid_argument("gather_rows: expected rank-2 tensor, got " +
                                x.shape_str());
  }
  const std::size_t n = x.rows(), d = x.cols();
  for (std::size_t r : idx) {
    if (r >= n) {
      throw std::invalid_argument("gather_rows: row " + std::to_string(r) +
                                  " out of range [0," + std::to_string(n) +
                                  ")");
    }
  }
  const auto& xv = x.values();
  std::vector<double> out(idx.size() * d);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy(&xv[idx[r] * d], &xv[idx[r] * d] + d, &out[r * d]);
  }
  Tensor result({idx.size(), d}, std::move(out));

  GradTape* tape = x.tape();
  if (!tape) return result;
  const int px = x.node();
  return tape->adopt(result, {px},
                     [px, idx = std::move(idx), d](GradTape& t, int self) {
                       if (!t.wants_grad(px)) return;
                       const auto& g = t.grad_values(self);
                       auto& gx = t.grad_buffer(px);
                       for (std::size_t r = 0; r < idx.size(); ++r) {
                         double* dst = &gx[idx[r] * d];
                         const double* src = &g[r * d];
                         for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
                       }
                     });
}

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape) {
  if (shape_product(shape) != x.size()) {
    throw std::invalid_argument("reshape: cannot view " + x.shape_str() +
                                " as requested shape (size mismatch)");
  }
  Tensor result(std::move(shape), x.values());

  GradTape* tape = x.tape();
  if (!tape) return result;
  const int px = x.node();
  return tape->adopt(result, {px}, [px](GradTape& t, int self) {
    if (!t.wants_grad(px)) return;
    const auto& g = t.grad_values(self);
    auto& gx = t.grad_buffer(px);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Tensor mean_rows(const Tensor& x) {
  if (x.rank() != 2 || x.rows() == 0) {
    throw std::invalid_argument("mean_rows: expected nonempty rank-2 tensor");
  }
  const std::size_t m = x.rows(), d = x.cols();
  const auto& xv = x.values();
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < d; ++c) out[c] += xv[i * d + c];
  }
  for (std::size_t c = 0; c < d; ++c) out[c] /= static_cast<double>(m);
  Tensor result({1, d}, std::move(out));

  GradTape* tape = x.tape();
  if (!tape) return result;
  const int px = x.node();
  return tape->adopt(result, {px}, [px, m, d](GradTape& t, int self) {
    if (!t.wants_grad(px)) return;
    const auto& g = t.grad_values(self);
    auto& gx = t.grad_buffer(px);
    const double inv = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t c = 0; c < d; ++c) gx[i * d + c] += g[c] * inv;
    }
  });
}

Tensor max_rows(const Tensor& x) {
  if (x.rank() != 2 || x.rows() == 0) {
    throw std::invalid_argument("max_rows: expected nonempty rank-2 tensor");
  }
  const std::size_t m = x.rows(), d = x.cols();
  const auto& xv = x.values();
  std::vector<double> out(d);
  std::vector<std::size_t> argmax(d, 0);  // first maximal row wins
  for (std::size_t c = 0; c < d; ++c) {
    double best = xv[c];
    for (std::size_t i = 1; i < m; ++i) {
      if (xv[i * d + c] > best) {
        best = xv[i * d + c];
        argmax[c] = i;
      }
    }
    out[c] = best;
  }
  Tensor result({1, d}, std::move(out));

  GradTape* tape = x.tape();
  if (!tape) return result;
  const int px = x.node();
  return tape->adopt(result, {px},
                     [px, d, argmax = std::move(argmax)](GradTape& t, int self) {
                       if (!t.wants_grad(px)) return;
                       const auto& g = t.grad_values(self);
                       auto& gx = t.grad_buffer(px);
                       for (std::size_t c = 0; c < d; ++c) {
                         gx[argmax[c] * d + c] += g[c];
                       }
                     });
}

Tensor sum(const Tensor& x) {
  const auto& xv = x.values();
  double total = std::accumulate(xv.begin(), xv.end(), 0.0);
  Tensor result({1}, {total});

  GradTape* tape = x.tape();
  if (!tape) return result;
  const int px = x.node();
  return tape->adopt(result, {px}, [px](GradTape& t, int self) {
    if (!t.wants_grad(px)) return;
    const double g = t.grad_values(self)[0];
    auto& gx = t.grad_buffer(px);
    for (double& v : gx) v += g;
  });
}

}  // namespace fedgat
