#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ckpl {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One vertex of the computation graph. Leaves have no backward function;
// interior nodes created by a differentiable op keep their parents alive
// until the graph is dropped.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::uint64_t seq = 0;     // creation order, strictly increasing
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad();
  bool is_leaf() const { return !backward; }
};

std::uint64_t next_sequence();

}  // namespace detail

// Dense row-major double tensor with optional gradient. Copies share the
// underlying node (handle semantics), so a parameter held in a model and the
// same parameter referenced from a loss graph are one object.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;
  // rows/cols view a rank-1 tensor as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  // Mutable access is meant for leaves (optimizer updates, loading, finite
  // differences); mutating an interior node does not re-run its graph.
  std::span<double> mutable_values();
  double item() const;
  double operator[](std::size_t i) const { return values()[i]; }
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Same values, fresh leaf, no graph.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Ordered record of the differentiable nodes reachable from a root, in the
// order they were executed. backward() walks it in reverse, once per node.
class Tape {
 public:
  explicit Tape(const Tensor& root);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<detail::Node*>& nodes() const { return nodes_; }

  // Seeds d(root)/d(root) = 1 and propagates. Leaf gradients accumulate
  // across calls; interior gradients are reset at tape construction.
  // Returns the number of nodes visited.
  std::size_t backward();

 private:
  Tensor root_;
  std::vector<detail::Node*> nodes_;
};

// Reverse-mode pass from a scalar loss.
void backward(const Tensor& loss);

}  // namespace ckpl
