#include "ckpl/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "ckpl/errors.hpp"

namespace ckpl {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

std::vector<double>& Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

std::uint64_t next_sequence() {
  static std::atomic<std::uint64_t> counter{0};
  return counter.fetch_add(1, std::memory_order_relaxed) + 1;
}

}  // namespace detail

namespace {

void validate_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor shape " + shape_str(shape) + " has a zero extent");
  }
}

const detail::Node& checked(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw Error("use of an undefined tensor");
  return *node;
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  validate_shape(shape);
  if (values.size() != shape_size(shape)) {
    throw DimensionError("tensor shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_size(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
  node_->seq = detail::next_sequence();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  auto n = values.size();
  return Tensor({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor({rows, cols}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::size() const { return checked(node_).value.size(); }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  if (s.size() == 2) return s[0];
  if (s.size() <= 1) return 1;
  throw DimensionError("rows() on tensor of shape " + shape_str(s));
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  if (s.size() == 2) return s[1];
  if (s.size() == 1) return s[0];
  if (s.empty()) return 1;
  throw DimensionError("cols() on tensor of shape " + shape_str(s));
}

std::span<const double> Tensor::values() const { return checked(node_).value; }

std::span<double> Tensor::mutable_values() {
  checked(node_);
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  auto nc = cols();
  if (r >= rows() || c >= nc) throw IndexError("element index out of range");
  return node_->value[r * nc + c];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!is_leaf()) throw Error("requires_grad can only be changed on a leaf tensor");
  node_->requires_grad = flag;
  if (!flag) node_->grad.clear();
}

bool Tensor::is_leaf() const { return checked(node_).is_leaf(); }

bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }

std::span<const double> Tensor::grad() const { return checked(node_).grad; }

void Tensor::zero_grad() {
  checked(node_);
  node_->grad.clear();
}

Tensor Tensor::detach() const {
  const auto& n = checked(node_);
  return Tensor(n.shape, n.value, false);
}

Tape::Tape(const Tensor& root) : root_(root) {
  if (!root.defined()) throw Error("tape root is undefined");
  std::vector<detail::Node*> stack{root.node().get()};
  std::unordered_set<detail::Node*> seen{root.node().get()};
  while (!stack.empty()) {
    auto* n = stack.back();
    stack.pop_back();
    if (!n->requires_grad) continue;
    nodes_.push_back(n);
    for (auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(nodes_.begin(), nodes_.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->seq < b->seq; });
  for (auto* n : nodes_) {
    if (!n->is_leaf()) n->grad.clear();
  }
}

std::size_t Tape::backward() {
  auto* root = root_.node().get();
  if (!root->requires_grad) return 0;
  if (root->value.size() != 1) {
    throw DimensionError("backward() needs a scalar root, got shape " + shape_str(root->shape));
  }
  root->ensure_grad()[0] += 1.0;
  std::size_t visited = 0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto* n = *it;
    ++visited;
    if (n->is_leaf() || n->grad.empty()) continue;
    n->backward(*n);
  }
  return visited;
}

void backward(const Tensor& loss) { Tape(loss).backward(); }

}  // namespace ckpl
