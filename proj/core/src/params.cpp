#include "pcup/params.hpp"

#include <cmath>

#include "pcup/ops.hpp"

namespace pcup {

Tensor ParameterSet::add(const std::string& name, Tensor value) {
  if (index_.count(name)) throw ContractViolation("duplicate parameter name '" + name + "'");
  if (!value.is_leaf()) value = value.detach();
  value.set_requires_grad(true);
  index_.emplace(name, tensors_.size());
  names_.push_back(name);
  tensors_.push_back(value);
  return value;
}

const Tensor& ParameterSet::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ContractViolation("unknown parameter '" + name + "'");
  return tensors_[it->second];
}

std::size_t ParameterSet::numel() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

void ParameterSet::assign(const std::string& name, const Shape& shape, std::span<const float> values) {
  Tensor t = get(name);
  if (t.shape() != shape || values.size() != t.numel()) {
    throw ContractViolation("parameter '" + name + "' has shape " + shape_str(t.shape()) + ", got " +
                            shape_str(shape));
  }
  std::copy(values.begin(), values.end(), t.data().begin());
}

void ParameterSet::zero_grad() {
  for (auto& t : tensors_) t.zero_grad();
}

Tensor init_normal(const Shape& shape, double stddev, Rng& rng) {
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<float>(stddev * rng.normal());
  return Tensor(shape, std::move(v));
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return bias.numel() > 0 ? add(y, bias) : y;
}

Linear make_linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                   double gain, bool bias) {
  Linear l;
  l.weight = params.add(name + ".weight", init_normal({in, out}, gain * std::sqrt(2.0 / in), rng));
  if (bias) l.bias = params.add(name + ".bias", Tensor::zeros({out}));
  return l;
}

Conv2d::Output Conv2d::operator()(const Tensor& x, std::size_t height, std::size_t width) const {
  const Tensor cols = im2col(x, height, width, kernel, stride, pad);
  return {add(matmul(cols, weight), bias), conv_out_extent(height, kernel, stride, pad),
          conv_out_extent(width, kernel, stride, pad)};
}

Conv2d make_conv(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
                 std::size_t kernel, std::size_t stride, Rng& rng, double gain) {
  Conv2d c;
  c.kernel = kernel;
  c.stride = stride;
  c.pad = kernel / 2;
  const std::size_t fan_in = kernel * kernel * in;
  c.weight = params.add(name + ".weight", init_normal({fan_in, out}, gain * std::sqrt(2.0 / fan_in), rng));
  c.bias = params.add(name + ".bias", Tensor::zeros({out}));
  return c;
}

}  // namespace pcup
