#pragma once

// Dense row-major tensors with a reverse-mode autodiff tape.
//
// A tensor is a shared handle to storage; copying a handle aliases the same
// buffer. Every op in ops.hpp returns a fresh tensor and, when grad mode is
// on and any input requires grad, attaches a Node that knows how to push the
// output gradient back into its inputs. The tape is implicit in those links.
//
// The engine is instantiated for float (training) and double (gradient
// checking). Module code uses the float alias `Tensor`.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcup {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Raised when a caller breaks an operation's precondition (shape mismatch,
/// out-of-range axis, wrong sizes). Messages carry the offending shapes.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when a forward op produces NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class T>
class BasicTensor;

template <class T>
struct TensorStorage;

template <class T>
struct Node {
  const char* op = "";
  std::vector<BasicTensor<T>> inputs;
  // Receives the finished output storage (data and grad) and accumulates
  // into the inputs that require grad.
  std::function<void(const TensorStorage<T>& out)> backward;
};

template <class T>
struct TensorStorage {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::shared_ptr<Node<T>> grad_fn;
};

template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor();
  BasicTensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static BasicTensor zeros(Shape shape, bool requires_grad = false);
  static BasicTensor full(Shape shape, T value, bool requires_grad = false);
  static BasicTensor scalar(T value, bool requires_grad = false);
  static BasicTensor matrix(std::size_t rows, std::size_t cols,
                            std::initializer_list<T> values,
                            bool requires_grad = false);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return impl_->data.size(); }
  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return dim(1); }

  std::span<T> data() { return impl_->data; }
  std::span<const T> data() const { return impl_->data; }
  std::vector<T> to_vector() const { return impl_->data; }
  T item() const;
  T at(std::size_t r, std::size_t c) const;
  T& at(std::size_t r, std::size_t c);

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on);
  bool is_leaf() const { return impl_->grad_fn == nullptr; }
  const Node<T>* grad_fn() const { return impl_->grad_fn.get(); }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  /// Grad buffer, allocated (zero-filled) on first access.
  std::vector<T>& grad_buffer();
  void zero_grad() { impl_->grad.clear(); }

  /// New leaf holding a copy of the values and no history.
  BasicTensor detach() const;
  BasicTensor clone() const { return detach(); }

  bool same_storage(const BasicTensor& other) const { return impl_ == other.impl_; }
  TensorStorage<T>& storage() { return *impl_; }
  const TensorStorage<T>& storage() const { return *impl_; }

 private:
  std::shared_ptr<TensorStorage<T>> impl_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

/// Grad recording is on by default and is thread-local.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Nodes reachable from `output`, inputs before consumers. Leaves are not
/// listed. Each node appears once.
template <class T>
std::vector<const TensorStorage<T>*> topo_order(const BasicTensor<T>& output);

/// Reverse pass from a single-element output. Gradients accumulate into the
/// grad buffers of every requires-grad leaf reachable from `output`; those
/// leaves are returned (each once). Intermediate gradients are released.
template <class T>
std::vector<BasicTensor<T>> backward(const BasicTensor<T>& output);

}  // namespace pcup
