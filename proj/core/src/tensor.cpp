#include "pcup/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace pcup {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <class T>
BasicTensor<T>::BasicTensor() : impl_(std::make_shared<TensorStorage<T>>()) {
  impl_->data.assign(1, T{0});
}

template <class T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data, bool requires_grad)
    : impl_(std::make_shared<TensorStorage<T>>()) {
  for (std::size_t extent : shape) {
    if (extent == 0) {
      throw ContractViolation("tensor extents must be positive, got " + shape_str(shape));
    }
  }
  if (data.size() != shape_numel(shape)) {
    throw ContractViolation("tensor data length " + std::to_string(data.size()) +
                            " does not match shape " + shape_str(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

template <class T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T{0}, requires_grad);
}

template <class T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return BasicTensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <class T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
  return BasicTensor(Shape{}, std::vector<T>{value}, requires_grad);
}

template <class T>
BasicTensor<T> BasicTensor<T>::matrix(std::size_t rows, std::size_t cols,
                                      std::initializer_list<T> values,
                                      bool requires_grad) {
  return BasicTensor(Shape{rows, cols}, std::vector<T>(values), requires_grad);
}

template <class T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) {
    throw ContractViolation("axis " + std::to_string(axis) + " out of range for shape " +
                            shape_str(impl_->shape));
  }
  return impl_->shape[axis];
}

template <class T>
T BasicTensor<T>::item() const {
  if (impl_->data.size() != 1) {
    throw ContractViolation("item() needs a single-element tensor, got " +
                            shape_str(impl_->shape));
  }
  return impl_->data[0];
}

template <class T>
T BasicTensor<T>::at(std::size_t r, std::size_t c) const {
  return impl_->data[r * impl_->shape.at(1) + c];
}

template <class T>
T& BasicTensor<T>::at(std::size_t r, std::size_t c) {
  return impl_->data[r * impl_->shape.at(1) + c];
}

template <class T>
void BasicTensor<T>::set_requires_grad(bool on) {
  if (!is_leaf()) throw ContractViolation("requires_grad can only be set on leaves");
  impl_->requires_grad = on;
}

template <class T>
std::vector<T>& BasicTensor<T>::grad_buffer() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T{0});
  return impl_->grad;
}

template <class T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return BasicTensor(impl_->shape, impl_->data, false);
}

template <class T>
std::vector<const TensorStorage<T>*> topo_order(const BasicTensor<T>& output) {
  std::vector<const TensorStorage<T>*> order;
  if (output.is_leaf()) return order;
  std::unordered_set<const TensorStorage<T>*> seen;
  // Iterative post-order DFS.
  struct Frame {
    const TensorStorage<T>* node;
    std::size_t next_input;
  };
  std::vector<Frame> stack{{&output.storage(), 0}};
  seen.insert(&output.storage());
  while (!stack.empty()) {
    Frame& top = stack.back();
    const auto& inputs = top.node->grad_fn->inputs;
    if (top.next_input < inputs.size()) {
      const TensorStorage<T>* child = &inputs[top.next_input++].storage();
      if (child->grad_fn && child->requires_grad && seen.insert(child).second) {
        stack.push_back({child, 0});
      }
    } else {
      order.push_back(top.node);
      stack.pop_back();
    }
  }
  return order;
}

template <class T>
std::vector<BasicTensor<T>> backward(const BasicTensor<T>& output) {
  if (output.numel() != 1) {
    throw ContractViolation("backward needs a single-element output, got " +
                            shape_str(output.shape()));
  }
  std::vector<BasicTensor<T>> leaves;
  if (!output.requires_grad()) return leaves;

  BasicTensor<T> root = output;
  if (root.is_leaf()) {
    root.grad_buffer()[0] += T{1};
    leaves.push_back(root);
    return leaves;
  }

  const auto order = topo_order(output);
  for (const auto* node : order) {
    const_cast<TensorStorage<T>*>(node)->grad.assign(node->data.size(), T{0});
  }
  root.storage().grad[0] = T{1};

  std::unordered_set<const TensorStorage<T>*> leaf_seen;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* node = const_cast<TensorStorage<T>*>(*it);
    node->grad_fn->backward(*node);
    for (auto& input : node->grad_fn->inputs) {
      if (input.is_leaf() && input.requires_grad() &&
          leaf_seen.insert(&input.storage()).second) {
        leaves.push_back(input);
      }
    }
    node->grad.clear();
    node->grad.shrink_to_fit();
  }
  return leaves;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template std::vector<const TensorStorage<float>*> topo_order(const BasicTensor<float>&);
template std::vector<const TensorStorage<double>*> topo_order(const BasicTensor<double>&);
template std::vector<BasicTensor<float>> backward(const BasicTensor<float>&);
template std::vector<BasicTensor<double>> backward(const BasicTensor<double>&);

}  // namespace pcup
