#pragma once

// Differentiable kernels. All ops are defined for BasicTensor<float> and
// BasicTensor<double>.
//
// Broadcasting is deliberately narrow. Binary elementwise ops accept a
// right-hand side that is (a) the same shape, (b) a single element, or
// (c) a vector whose length equals the last extent of the left-hand side
// (added to every row). Anything else is a ContractViolation.

#include <cstddef>
#include <span>
#include <vector>

#include "pcup/tensor.hpp"

namespace pcup {

inline constexpr double kLeakySlope = 0.2;

template <class T> BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <class T> BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <class T> BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <class T> BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <class T> BasicTensor<T> div(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <class T> BasicTensor<T> add_scalar(const BasicTensor<T>& a, double s);
template <class T> BasicTensor<T> mul_scalar(const BasicTensor<T>& a, double s);
template <class T> BasicTensor<T> neg(const BasicTensor<T>& a);

template <class T>
BasicTensor<T> concat(const std::vector<BasicTensor<T>>& parts, std::size_t axis);

/// out[i] = x[indices[i]] along axis 0. Repeated indices are allowed; their
/// gradients add up.
template <class T>
BasicTensor<T> gather_rows(const BasicTensor<T>& x, std::span<const std::size_t> indices);

template <class T> BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);
/// Swaps the two axes of a rank-2 tensor.
template <class T> BasicTensor<T> transpose(const BasicTensor<T>& x);

template <class T> BasicTensor<T> reduce_sum(const BasicTensor<T>& x);
template <class T> BasicTensor<T> reduce_sum(const BasicTensor<T>& x, std::size_t axis);
template <class T> BasicTensor<T> reduce_mean(const BasicTensor<T>& x);
template <class T> BasicTensor<T> reduce_mean(const BasicTensor<T>& x, std::size_t axis);
/// Max along `axis`; the gradient goes to the first maximal element.
template <class T> BasicTensor<T> reduce_max(const BasicTensor<T>& x, std::size_t axis);
template <class T> BasicTensor<T> softmax(const BasicTensor<T>& x, std::size_t axis);

template <class T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x, double slope = kLeakySlope);
template <class T> BasicTensor<T> sigmoid(const BasicTensor<T>& x);
template <class T> BasicTensor<T> exp(const BasicTensor<T>& x);
template <class T> BasicTensor<T> log(const BasicTensor<T>& x);
template <class T> BasicTensor<T> square(const BasicTensor<T>& x);
template <class T> BasicTensor<T> sqrt(const BasicTensor<T>& x);

/// Euclidean norm of all elements. Gradient at the zero vector is zero.
template <class T> BasicTensor<T> l2_norm(const BasicTensor<T>& x);
/// Euclidean norm along `axis`; zero-norm slices get zero gradient.
template <class T> BasicTensor<T> l2_norm(const BasicTensor<T>& x, std::size_t axis);

/// Patch extraction for convolution. `x` is an (H*W)xC image in row-major
/// pixel order. Returns (Ho*Wo) x (k*k*C) with zero padding `pad`.
template <class T>
BasicTensor<T> im2col(const BasicTensor<T>& x, std::size_t height, std::size_t width,
                      std::size_t kernel, std::size_t stride, std::size_t pad);

inline std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                                   std::size_t pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

}  // namespace pcup
