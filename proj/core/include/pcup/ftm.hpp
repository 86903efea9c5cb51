#pragma once

// Parameter-free attention over feature maps stored as [H*W, C].
//
// Every element t of channel c receives the score
//   a_t = ((t - mu_c)^2 + 2 s_c) / (4 s_c),   s_c = var_c + lambda,
// the reciprocal of the minimal value of a per-element linear-separability
// energy. Scores are turned into weights by a softmax over the spatial
// positions of each channel and multiply the features element-wise.

#include <span>
#include <vector>

#include "pcup/tensor.hpp"

namespace pcup {

inline constexpr double kFtmLambda = 1e-4;

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> variance;  // population variance (divides by H*W)
};

/// Per-channel mean and variance of a [H*W, C] map, computed in double.
template <class T>
ChannelStats channel_stats(const BasicTensor<T>& map);

/// Energy of element t against its peers for the linear map (w, b):
///   mean_i (-1 - (w t_i + b))^2 + (1 - (w t + b))^2 + lambda w^2.
double ftm_energy(double t, double w, double b, std::span<const double> others, double lambda);

/// Minimum of ftm_energy over (w, b), in closed form from the peers'
/// mean and population variance: 4 s / ((t - mu)^2 + 2 s).
double ftm_min_energy(double t, std::span<const double> others, double lambda);

/// Saliency 4 s / ((t - mu)^2 + 2 s) and its reciprocal, the attention
/// score used by the module.
double ftm_saliency(double t, double mean, double variance, double lambda);
double ftm_score(double t, double mean, double variance, double lambda);

/// Differentiable attention scores, same shape as `map`.
template <class T>
BasicTensor<T> ftm_attention(const BasicTensor<T>& map, double lambda = kFtmLambda);

/// softmax over axis 0 of the scores, times the map.
template <class T>
BasicTensor<T> ftm_weights(const BasicTensor<T>& map, double lambda = kFtmLambda);
template <class T>
BasicTensor<T> ftm_apply(const BasicTensor<T>& map, double lambda = kFtmLambda);

}  // namespace pcup
