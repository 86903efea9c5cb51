#pragma once

// Named trainable tensors and the small layer building blocks shared by the
// networks.

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pcup/rng.hpp"
#include "pcup/tensor.hpp"

namespace pcup {

/// Ordered collection of named leaf tensors. Handles returned by add() stay
/// valid for the set's lifetime; loading overwrites values in place.
class ParameterSet {
 public:
  /// Registers `value` as a grad-requiring leaf.
  Tensor add(const std::string& name, Tensor value);

  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  const Tensor& get(const std::string& name) const;
  std::size_t size() const { return tensors_.size(); }
  std::size_t numel() const;
  const std::vector<std::string>& names() const { return names_; }
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }

  /// Copies `values` into the named tensor; shapes must agree.
  void assign(const std::string& name, const Shape& shape, std::span<const float> values);
  void zero_grad();

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

Tensor init_normal(const Shape& shape, double stddev, Rng& rng);

/// y = x W + b with W [in, out] and b [out].
struct Linear {
  Tensor weight;
  Tensor bias;  // empty shape when the layer has no bias

  Tensor operator()(const Tensor& x) const;
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
};

/// He-style init scaled by `gain`; biases start at zero.
Linear make_linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                   double gain = 1.0, bool bias = true);

/// Square-kernel convolution over feature maps stored as [H*W, C].
struct Conv2d {
  Tensor weight;  // [k*k*in, out], rows ordered (ky, kx, c)
  Tensor bias;    // [out]
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;

  struct Output {
    Tensor map;
    std::size_t height;
    std::size_t width;
  };
  Output operator()(const Tensor& x, std::size_t height, std::size_t width) const;
};

Conv2d make_conv(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                 std::size_t kernel, std::size_t stride, Rng& rng, double gain = 1.0);

}  // namespace pcup
