#include "pcup/ftm.hpp"

#include <string>

#include "pcup/ops.hpp"

namespace pcup {

namespace {

void require_map(const char* who, const Shape& shape) {
  if (shape.size() != 2 || shape[0] == 0 || shape[1] == 0) {
    throw ContractViolation(std::string(who) + ": expected a non-empty [H*W, C] map, got " + shape_str(shape));
  }
}

void require_lambda(const char* who, double lambda) {
  if (!(lambda > 0.0)) throw ContractViolation(std::string(who) + ": lambda must be positive");
}

}  // namespace

template <class T>
ChannelStats channel_stats(const BasicTensor<T>& map) {
  require_map("channel_stats", map.shape());
  const std::size_t n = map.dim(0), c = map.dim(1);
  const auto d = map.data();
  ChannelStats s;
  s.mean.assign(c, 0.0);
  s.variance.assign(c, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) s.mean[k] += d[i * c + k];
  }
  for (auto& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      const double dev = d[i * c + k] - s.mean[k];
      s.variance[k] += dev * dev;
    }
  }
  for (auto& v : s.variance) v /= static_cast<double>(n);
  return s;
}

double ftm_energy(double t, double w, double b, std::span<const double> others, double lambda) {
  if (others.empty()) throw ContractViolation("ftm_energy: peer set is empty");
  double peers = 0.0;
  for (const double x : others) {
    const double r = -1.0 - (w * x + b);
    peers += r * r;
  }
  peers /= static_cast<double>(others.size());
  const double self = 1.0 - (w * t + b);
  return peers + self * self + lambda * w * w;
}

double ftm_min_energy(double t, std::span<const double> others, double lambda) {
  if (others.empty()) throw ContractViolation("ftm_min_energy: peer set is empty");
  require_lambda("ftm_min_energy", lambda);
  double mean = 0.0;
  for (const double x : others) mean += x;
  mean /= static_cast<double>(others.size());
  double var = 0.0;
  for (const double x : others) var += (x - mean) * (x - mean);
  var /= static_cast<double>(others.size());
  return ftm_saliency(t, mean, var, lambda);
}

double ftm_saliency(double t, double mean, double variance, double lambda) {
  const double s = variance + lambda;
  return 4.0 * s / ((t - mean) * (t - mean) + 2.0 * s);
}

double ftm_score(double t, double mean, double variance, double lambda) {
  const double s = variance + lambda;
  return ((t - mean) * (t - mean) + 2.0 * s) / (4.0 * s);
}

template <class T>
BasicTensor<T> ftm_attention(const BasicTensor<T>& map, double lambda) {
  require_map("ftm_attention", map.shape());
  require_lambda("ftm_attention", lambda);
  const auto mean = reduce_mean(map, 0);
  const auto dev_sq = square(sub(map, mean));
  const auto s = add_scalar(reduce_mean(dev_sq, 0), lambda);
  return div(add(dev_sq, mul_scalar(s, 2.0)), mul_scalar(s, 4.0));
}

template <class T>
BasicTensor<T> ftm_weights(const BasicTensor<T>& map, double lambda) {
  return softmax(ftm_attention(map, lambda), 0);
}

template <class T>
BasicTensor<T> ftm_apply(const BasicTensor<T>& map, double lambda) {
  return mul(ftm_weights(map, lambda), map);
}

#define PCUP_INSTANTIATE_FTM(T)                                             \
  template ChannelStats channel_stats(const BasicTensor<T>&);               \
  template BasicTensor<T> ftm_attention(const BasicTensor<T>&, double);     \
  template BasicTensor<T> ftm_weights(const BasicTensor<T>&, double);       \
  template BasicTensor<T> ftm_apply(const BasicTensor<T>&, double);

PCUP_INSTANTIATE_FTM(float)
PCUP_INSTANTIATE_FTM(double)

}  // namespace pcup
