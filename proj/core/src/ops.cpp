#include "pcup/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <string>
#include <type_traits>
#include <utility>

namespace pcup {

namespace {

template <class T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <class T>
using BackwardFn = std::function<void(const TensorStorage<T>&)>;

// NaN and Inf are exactly the values with an all-ones exponent. Testing bits
// instead of calling std::isfinite lets the loop vectorise.
template <class T>
bool all_finite(const std::vector<T>& data) {
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  constexpr Bits exponent = static_cast<Bits>(sizeof(T) == 4 ? 0x7f800000ull : 0x7ff0000000000000ull);
  Bits hit = 0;
  for (const T v : data) hit |= static_cast<Bits>((std::bit_cast<Bits>(v) & exponent) == exponent);
  return hit == 0;
}

template <class T>
BasicTensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                           std::vector<BasicTensor<T>> inputs, BackwardFn<T> bw) {
  if (!all_finite(data)) throw NumericError(std::string("non-finite value produced by ") + op);
  BasicTensor<T> out(std::move(shape), std::move(data));
  const bool need = grad_enabled() &&
                    std::any_of(inputs.begin(), inputs.end(),
                                [](const BasicTensor<T>& t) { return t.requires_grad(); });
  if (need) {
    auto node = std::make_shared<Node<T>>();
    node->op = op;
    node->inputs = std::move(inputs);
    node->backward = std::move(bw);
    out.storage().requires_grad = true;
    out.storage().grad_fn = std::move(node);
  }
  return out;
}

// Grad buffer of `t` if it participates in the backward pass. Handles share
// storage, so a const handle still addresses the mutable buffer.
template <class T>
T* grad_of(const BasicTensor<T>& t) {
  return t.requires_grad() ? const_cast<BasicTensor<T>&>(t).grad_buffer().data() : nullptr;
}

enum class Broadcast { kSame, kScalar, kRow };

template <class T>
Broadcast classify(const char* op, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (b.numel() == 1) return Broadcast::kScalar;
  const bool row_vector = b.rank() == 1 || (b.rank() == 2 && b.dim(0) == 1);
  if (a.rank() >= 1 && row_vector && b.numel() == a.shape().back()) return Broadcast::kRow;
  throw ContractViolation(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                          " vs " + shape_str(b.shape()));
}

// Elementwise binary op. `fwd(x, y)`; `dx(x, y, out)` and `dy(x, y, out)`
// are the local partials.
template <class T, class Fwd, class Dx, class Dy>
BasicTensor<T> binary(const char* op, const BasicTensor<T>& a, const BasicTensor<T>& b,
                      Fwd fwd, Dx dx, Dy dy) {
  const Broadcast mode = classify(op, a, b);
  const std::size_t n = a.numel();
  const std::size_t width = b.numel();
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<T> out(n);
  // One loop per broadcast mode keeps the inner loops vectorisable.
  switch (mode) {
    case Broadcast::kSame:
      for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ad[i], bd[i]);
      break;
    case Broadcast::kScalar:
      for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ad[i], bd[0]);
      break;
    case Broadcast::kRow:
      for (std::size_t r = 0; r < n; r += width) {
        for (std::size_t k = 0; k < width; ++k) out[r + k] = fwd(ad[r + k], bd[k]);
      }
      break;
  }
  return make_result<T>(
      op, a.shape(), std::move(out), {a, b},
      [a, b, mode, width, dx, dy](const TensorStorage<T>& o) {
        T* ga = grad_of(a);
        T* gb = grad_of(b);
        const auto av = a.data();
        const auto bv = b.data();
        const std::size_t total = o.data.size();
        const T* g = o.grad.data();
        const T* y = o.data.data();
        if (ga) {
          switch (mode) {
            case Broadcast::kSame:
              for (std::size_t i = 0; i < total; ++i) ga[i] += g[i] * dx(av[i], bv[i], y[i]);
              break;
            case Broadcast::kScalar:
              for (std::size_t i = 0; i < total; ++i) ga[i] += g[i] * dx(av[i], bv[0], y[i]);
              break;
            case Broadcast::kRow:
              for (std::size_t r = 0; r < total; r += width) {
                for (std::size_t k = 0; k < width; ++k) ga[r + k] += g[r + k] * dx(av[r + k], bv[k], y[r + k]);
              }
              break;
          }
        }
        if (gb) {
          switch (mode) {
            case Broadcast::kSame:
              for (std::size_t i = 0; i < total; ++i) gb[i] += g[i] * dy(av[i], bv[i], y[i]);
              break;
            case Broadcast::kScalar:
              for (std::size_t i = 0; i < total; ++i) gb[0] += g[i] * dy(av[i], bv[0], y[i]);
              break;
            case Broadcast::kRow:
              for (std::size_t r = 0; r < total; r += width) {
                for (std::size_t k = 0; k < width; ++k) gb[k] += g[r + k] * dy(av[r + k], bv[k], y[r + k]);
              }
              break;
          }
        }
      });
}

template <class T, class Fwd, class Deriv>
BasicTensor<T> unary(const char* op, const BasicTensor<T>& a, Fwd fwd, Deriv deriv) {
  const auto ad = a.data();
  std::vector<T> out(ad.size());
  for (std::size_t i = 0; i < ad.size(); ++i) out[i] = fwd(ad[i]);
  return make_result<T>(op, a.shape(), std::move(out), {a},
                        [a, deriv](const TensorStorage<T>& o) {
                          T* ga = grad_of(a);
                          const auto av = a.data();
                          for (std::size_t i = 0; i < o.data.size(); ++i) {
                            ga[i] += o.grad[i] * deriv(av[i], o.data[i]);
                          }
                        });
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
  Shape reduced;
};

AxisSplit split_axis(const char* op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ContractViolation(std::string(op) + ": axis " + std::to_string(axis) +
                            " out of range for shape " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) s.reduced.push_back(shape[i]);
  }
  return s;
}

}  // namespace

template <class T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ContractViolation("matmul: shape mismatch " + shape_str(a.shape()) + " x " +
                            shape_str(b.shape()));
  }
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto n = static_cast<Eigen::Index>(b.dim(1));
  std::vector<T> out(static_cast<std::size_t>(m * n));
  MatMap<T>(out.data(), m, n).noalias() =
      ConstMatMap<T>(a.data().data(), m, k) * ConstMatMap<T>(b.data().data(), k, n);
  return make_result<T>("matmul", Shape{a.dim(0), b.dim(1)}, std::move(out), {a, b},
                        [a, b, m, k, n](const TensorStorage<T>& o) {
                          ConstMatMap<T> g(o.grad.data(), m, n);
                          if (T* ga = grad_of(a)) {
                            MatMap<T>(ga, m, k).noalias() +=
                                g * ConstMatMap<T>(b.data().data(), k, n).transpose();
                          }
                          if (T* gb = grad_of(b)) {
                            MatMap<T>(gb, k, n).noalias() +=
                                ConstMatMap<T>(a.data().data(), m, k).transpose() * g;
                          }
                        });
}

template <class T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return binary<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T, T) { return T{1}; },
      [](T, T, T) { return T{1}; });
}

template <class T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T, T) { return T{1}; },
      [](T, T, T) { return T{-1}; });
}

template <class T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return binary<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y, T) { return y; },
      [](T x, T, T) { return x; });
}

template <class T>
BasicTensor<T> div(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return binary<T>(
      "div", a, b, [](T x, T y) { return x / y; }, [](T, T y, T) { return T{1} / y; },
      [](T, T y, T out) { return -out / y; });
}

template <class T>
BasicTensor<T> add_scalar(const BasicTensor<T>& a, double s) {
  const T c = static_cast<T>(s);
  return unary<T>(
      "add_scalar", a, [c](T x) { return x + c; }, [](T, T) { return T{1}; });
}

template <class T>
BasicTensor<T> mul_scalar(const BasicTensor<T>& a, double s) {
  const T c = static_cast<T>(s);
  return unary<T>(
      "mul_scalar", a, [c](T x) { return x * c; }, [c](T, T) { return c; });
}

template <class T>
BasicTensor<T> neg(const BasicTensor<T>& a) {
  return unary<T>(
      "neg", a, [](T x) { return -x; }, [](T, T) { return T{-1}; });
}

template <class T>
BasicTensor<T> concat(const std::vector<BasicTensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractViolation("concat: no inputs");
  const Shape& first = parts.front().shape();
  AxisSplit ref = split_axis("concat", first, axis);
  std::size_t total_len = 0;
  for (const auto& p : parts) {
    AxisSplit s = split_axis("concat", p.shape(), axis);
    if (s.reduced != ref.reduced) {
      throw ContractViolation("concat: shape mismatch " + shape_str(first) + " vs " +
                              shape_str(p.shape()));
    }
    total_len += s.len;
  }
  Shape out_shape = first;
  out_shape[axis] = total_len;
  const std::size_t out_block = total_len * ref.inner;
  std::vector<T> out(ref.outer * out_block);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t block = p.dim(axis) * ref.inner;
    const auto pd = p.data();
    for (std::size_t o = 0; o < ref.outer; ++o) {
      std::copy_n(pd.begin() + static_cast<std::ptrdiff_t>(o * block), block,
                  out.begin() + static_cast<std::ptrdiff_t>(o * out_block + offset));
    }
    offset += block;
  }
  const std::size_t outer = ref.outer;
  const std::size_t inner = ref.inner;
  return make_result<T>(
      "concat", std::move(out_shape), std::move(out), parts,
      [parts, axis, outer, inner, out_block](const TensorStorage<T>& o) {
        std::size_t off = 0;
        for (auto& p : parts) {
          const std::size_t block = p.dim(axis) * inner;
          if (T* gp = grad_of(p)) {
            for (std::size_t r = 0; r < outer; ++r) {
              for (std::size_t i = 0; i < block; ++i) {
                gp[r * block + i] += o.grad[r * out_block + off + i];
              }
            }
          }
          off += block;
        }
      });
}

template <class T>
BasicTensor<T> gather_rows(const BasicTensor<T>& x, std::span<const std::size_t> indices) {
  if (x.rank() < 1) throw ContractViolation("gather_rows: rank-0 input");
  if (indices.empty()) throw ContractViolation("gather_rows: empty index list");
  const std::size_t n = x.dim(0);
  const std::size_t row = x.numel() / n;
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<T> out(idx.size() * row);
  const auto xd = x.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= n) {
      throw ContractViolation("gather_rows: index " + std::to_string(idx[i]) +
                              " out of range for shape " + shape_str(x.shape()));
    }
    std::copy_n(xd.begin() + static_cast<std::ptrdiff_t>(idx[i] * row), row,
                out.begin() + static_cast<std::ptrdiff_t>(i * row));
  }
  Shape shape = x.shape();
  shape[0] = idx.size();
  return make_result<T>("gather_rows", std::move(shape), std::move(out), {x},
                        [x, idx = std::move(idx), row](const TensorStorage<T>& o) {
                          T* gx = grad_of(x);
                          for (std::size_t i = 0; i < idx.size(); ++i) {
                            for (std::size_t c = 0; c < row; ++c) {
                              gx[idx[i] * row + c] += o.grad[i * row + c];
                            }
                          }
                        });
}

template <class T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ContractViolation("reshape: cannot view " + shape_str(x.shape()) + " as " +
                            shape_str(shape));
  }
  return make_result<T>("reshape", std::move(shape), x.to_vector(), {x},
                        [x](const TensorStorage<T>& o) {
                          T* gx = grad_of(x);
                          for (std::size_t i = 0; i < o.grad.size(); ++i) gx[i] += o.grad[i];
                        });
}

template <class T>
BasicTensor<T> transpose(const BasicTensor<T>& x) {
  if (x.rank() != 2) throw ContractViolation("transpose: needs rank 2, got " + shape_str(x.shape()));
  const std::size_t r = x.dim(0);
  const std::size_t c = x.dim(1);
  std::vector<T> out(r * c);
  const auto xd = x.data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xd[i * c + j];
  }
  return make_result<T>("transpose", Shape{c, r}, std::move(out), {x},
                        [x, r, c](const TensorStorage<T>& o) {
                          T* gx = grad_of(x);
                          for (std::size_t i = 0; i < r; ++i) {
                            for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += o.grad[j * r + i];
                          }
                        });
}

template <class T>
BasicTensor<T> reduce_sum(const BasicTensor<T>& x) {
  double acc = 0.0;
  for (const T v : x.data()) acc += v;
  return make_result<T>("reduce_sum", Shape{}, {static_cast<T>(acc)}, {x},
                        [x](const TensorStorage<T>& o) {
                          T* gx = grad_of(x);
                          for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += o.grad[0];
                        });
}

template <class T>
BasicTensor<T> reduce_mean(const BasicTensor<T>& x) {
  double acc = 0.0;
  for (const T v : x.data()) acc += v;
  const double n = static_cast<double>(x.numel());
  return make_result<T>("reduce_mean", Shape{}, {static_cast<T>(acc / n)}, {x},
                        [x, n](const TensorStorage<T>& o) {
                          T* gx = grad_of(x);
                          const T g = static_cast<T>(o.grad[0] / n);
                          for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += g;
                        });
}

namespace {

template <class T>
BasicTensor<T> reduce_axis_linear(const char* op, const BasicTensor<T>& x, std::size_t axis,
                                  bool mean) {
  const AxisSplit s = split_axis(op, x.shape(), axis);
  std::vector<double> acc(s.outer * s.inner, 0.0);
  const auto xd = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t l = 0; l < s.len; ++l) {
      const std::size_t base = (o * s.len + l) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) acc[o * s.inner + i] += xd[base + i];
    }
  }
  const double scale = mean ? 1.0 / static_cast<double>(s.len) : 1.0;
  std::vector<T> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<T>(acc[i] * scale);
  return make_result<T>(op, s.reduced, std::move(out), {x},
                        [x, s, scale](const TensorStorage<T>& o) {
                          T* gx = grad_of(x);
                          for (std::size_t a = 0; a < s.outer; ++a) {
                            for (std::size_t l = 0; l < s.len; ++l) {
                              const std::size_t base = (a * s.len + l) * s.inner;
                              for (std::size_t i = 0; i < s.inner; ++i) {
                                gx[base + i] +=
                                    static_cast<T>(o.grad[a * s.inner + i] * scale);
                              }
                            }
                          }
                        });
}

}  // namespace

template <class T>
BasicTensor<T> reduce_sum(const BasicTensor<T>& x, std::size_t axis) {
  return reduce_axis_linear(("reduce_sum"), x, axis, false);
}

template <class T>
BasicTensor<T> reduce_mean(const BasicTensor<T>& x, std::size_t axis) {
  return reduce_axis_linear(("reduce_mean"), x, axis, true);
}

template <class T>
BasicTensor<T> reduce_max(const BasicTensor<T>& x, std::size_t axis) {
  const AxisSplit s = split_axis("reduce_max", x.shape(), axis);
  const auto xd = x.data();
  std::vector<T> out(s.outer * s.inner);
  std::vector<std::size_t> arg(out.size());
  // Sweep rows in memory order; the strict comparison keeps the first maximum.
  for (std::size_t o = 0; o < s.outer; ++o) {
    T* best = out.data() + o * s.inner;
    std::size_t* where = arg.data() + o * s.inner;
    const std::size_t base = o * s.len * s.inner;
    for (std::size_t i = 0; i < s.inner; ++i) {
      best[i] = xd[base + i];
      where[i] = base + i;
    }
    for (std::size_t l = 1; l < s.len; ++l) {
      const std::size_t row = base + l * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) {
        if (xd[row + i] > best[i]) {
          best[i] = xd[row + i];
          where[i] = row + i;
        }
      }
    }
  }
  return make_result<T>("reduce_max", s.reduced, std::move(out), {x},
                        [x, arg = std::move(arg)](const TensorStorage<T>& o) {
                          T* gx = grad_of(x);
                          for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += o.grad[i];
                        });
}

template <class T>
BasicTensor<T> softmax(const BasicTensor<T>& x, std::size_t axis) {
  const AxisSplit s = split_axis("softmax", x.shape(), axis);
  const auto xd = x.data();
  std::vector<T> out(x.numel());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      T peak = xd[base];
      for (std::size_t l = 1; l < s.len; ++l) peak = std::max(peak, xd[base + l * s.inner]);
      double total = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const T e = std::exp(xd[base + l * s.inner] - peak);
        out[base + l * s.inner] = e;
        total += e;
      }
      for (std::size_t l = 0; l < s.len; ++l) {
        out[base + l * s.inner] = static_cast<T>(out[base + l * s.inner] / total);
      }
    }
  }
  return make_result<T>("softmax", x.shape(), std::move(out), {x},
                        [x, s](const TensorStorage<T>& o) {
                          T* gx = grad_of(x);
                          for (std::size_t a = 0; a < s.outer; ++a) {
                            for (std::size_t i = 0; i < s.inner; ++i) {
                              const std::size_t base = a * s.len * s.inner + i;
                              double dot = 0.0;
                              for (std::size_t l = 0; l < s.len; ++l) {
                                const std::size_t at = base + l * s.inner;
                                dot += static_cast<double>(o.grad[at]) * o.data[at];
                              }
                              for (std::size_t l = 0; l < s.len; ++l) {
                                const std::size_t at = base + l * s.inner;
                                gx[at] += static_cast<T>(o.data[at] * (o.grad[at] - dot));
                              }
                            }
                          }
                        });
}

template <class T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x, double slope) {
  const T k = static_cast<T>(slope);
  return unary<T>(
      "leaky_relu", x, [k](T v) { return k <= T{1} ? std::max(v, k * v) : std::min(v, k * v); },
      [k](T v, T) { return v > T{0} ? T{1} : k; });
}

template <class T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  return unary<T>(
      "sigmoid", x, [](T v) { return T{1} / (T{1} + std::exp(-v)); },
      [](T, T y) { return y * (T{1} - y); });
}

template <class T>
BasicTensor<T> exp(const BasicTensor<T>& x) {
  return unary<T>(
      "exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <class T>
BasicTensor<T> log(const BasicTensor<T>& x) {
  return unary<T>(
      "log", x, [](T v) { return std::log(v); }, [](T v, T) { return T{1} / v; });
}

template <class T>
BasicTensor<T> square(const BasicTensor<T>& x) {
  return unary<T>(
      "square", x, [](T v) { return v * v; }, [](T v, T) { return T{2} * v; });
}

template <class T>
BasicTensor<T> sqrt(const BasicTensor<T>& x) {
  return unary<T>(
      "sqrt", x, [](T v) { return std::sqrt(v); },
      [](T, T y) { return y > T{0} ? T{0.5} / y : T{0}; });
}

template <class T>
BasicTensor<T> l2_norm(const BasicTensor<T>& x) {
  double acc = 0.0;
  for (const T v : x.data()) acc += static_cast<double>(v) * v;
  const T norm = static_cast<T>(std::sqrt(acc));
  return make_result<T>("l2_norm", Shape{}, {norm}, {x},
                        [x](const TensorStorage<T>& o) {
                          if (o.data[0] == T{0}) return;
                          T* gx = grad_of(x);
                          const auto xd = x.data();
                          const T scale = o.grad[0] / o.data[0];
                          for (std::size_t i = 0; i < xd.size(); ++i) gx[i] += scale * xd[i];
                        });
}

template <class T>
BasicTensor<T> l2_norm(const BasicTensor<T>& x, std::size_t axis) {
  const AxisSplit s = split_axis("l2_norm", x.shape(), axis);
  const auto xd = x.data();
  std::vector<T> out(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      double acc = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const T v = xd[(o * s.len + l) * s.inner + i];
        acc += static_cast<double>(v) * v;
      }
      out[o * s.inner + i] = static_cast<T>(std::sqrt(acc));
    }
  }
  return make_result<T>("l2_norm_axis", s.reduced, std::move(out), {x},
                        [x, s](const TensorStorage<T>& o) {
                          T* gx = grad_of(x);
                          const auto xv = x.data();
                          for (std::size_t a = 0; a < s.outer; ++a) {
                            for (std::size_t i = 0; i < s.inner; ++i) {
                              const T norm = o.data[a * s.inner + i];
                              if (norm == T{0}) continue;
                              const T scale = o.grad[a * s.inner + i] / norm;
                              for (std::size_t l = 0; l < s.len; ++l) {
                                const std::size_t at = (a * s.len + l) * s.inner + i;
                                gx[at] += scale * xv[at];
                              }
                            }
                          }
                        });
}

template <class T>
BasicTensor<T> im2col(const BasicTensor<T>& x, std::size_t height, std::size_t width,
                      std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (x.rank() != 2 || x.dim(0) != height * width) {
    throw ContractViolation("im2col: input " + shape_str(x.shape()) + " is not a " +
                            std::to_string(height) + "x" + std::to_string(width) + " image");
  }
  if (kernel == 0 || stride == 0 || height + 2 * pad < kernel || width + 2 * pad < kernel) {
    throw ContractViolation("im2col: kernel does not fit the padded image");
  }
  const std::size_t channels = x.dim(1);
  const std::size_t out_h = conv_out_extent(height, kernel, stride, pad);
  const std::size_t out_w = conv_out_extent(width, kernel, stride, pad);
  const std::size_t patch = kernel * kernel * channels;
  // Source pixel per (output pixel, kernel tap); -1 marks padding.
  std::vector<std::ptrdiff_t> source(out_h * out_w * kernel * kernel, -1);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      for (std::size_t ky = 0; ky < kernel; ++ky) {
        for (std::size_t kx = 0; kx < kernel; ++kx) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                          static_cast<std::ptrdiff_t>(pad);
          const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                          static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(height) ||
              ix >= static_cast<std::ptrdiff_t>(width)) {
            continue;
          }
          source[((oy * out_w + ox) * kernel + ky) * kernel + kx] =
              iy * static_cast<std::ptrdiff_t>(width) + ix;
        }
      }
    }
  }
  std::vector<T> out(out_h * out_w * patch, T{0});
  const auto xd = x.data();
  const std::size_t taps = kernel * kernel;
  for (std::size_t p = 0; p < out_h * out_w; ++p) {
    for (std::size_t t = 0; t < taps; ++t) {
      const std::ptrdiff_t src = source[p * taps + t];
      if (src < 0) continue;
      std::copy_n(xd.begin() + src * static_cast<std::ptrdiff_t>(channels), channels,
                  out.begin() + static_cast<std::ptrdiff_t>(p * patch + t * channels));
    }
  }
  return make_result<T>(
      "im2col", Shape{out_h * out_w, patch}, std::move(out), {x},
      [x, source = std::move(source), channels, taps, patch](const TensorStorage<T>& o) {
        T* gx = grad_of(x);
        const std::size_t pixels = source.size() / taps;
        for (std::size_t p = 0; p < pixels; ++p) {
          for (std::size_t t = 0; t < taps; ++t) {
            const std::ptrdiff_t src = source[p * taps + t];
            if (src < 0) continue;
            const T* g = o.grad.data() + p * patch + t * channels;
            T* dst = gx + src * static_cast<std::ptrdiff_t>(channels);
            for (std::size_t c = 0; c < channels; ++c) dst[c] += g[c];
          }
        }
      });
}

#define PCUP_INSTANTIATE_OPS(T)                                                              \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);             \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template BasicTensor<T> div(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template BasicTensor<T> add_scalar(const BasicTensor<T>&, double);                        \
  template BasicTensor<T> mul_scalar(const BasicTensor<T>&, double);                        \
  template BasicTensor<T> neg(const BasicTensor<T>&);                                       \
  template BasicTensor<T> concat(const std::vector<BasicTensor<T>>&, std::size_t);          \
  template BasicTensor<T> gather_rows(const BasicTensor<T>&, std::span<const std::size_t>); \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                            \
  template BasicTensor<T> transpose(const BasicTensor<T>&);                                 \
  template BasicTensor<T> reduce_sum(const BasicTensor<T>&);                                \
  template BasicTensor<T> reduce_sum(const BasicTensor<T>&, std::size_t);                   \
  template BasicTensor<T> reduce_mean(const BasicTensor<T>&);                               \
  template BasicTensor<T> reduce_mean(const BasicTensor<T>&, std::size_t);                  \
  template BasicTensor<T> reduce_max(const BasicTensor<T>&, std::size_t);                   \
  template BasicTensor<T> softmax(const BasicTensor<T>&, std::size_t);                      \
  template BasicTensor<T> leaky_relu(const BasicTensor<T>&, double);                        \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                   \
  template BasicTensor<T> exp(const BasicTensor<T>&);                                       \
  template BasicTensor<T> log(const BasicTensor<T>&);                                       \
  template BasicTensor<T> square(const BasicTensor<T>&);                                    \
  template BasicTensor<T> sqrt(const BasicTensor<T>&);                                      \
  template BasicTensor<T> l2_norm(const BasicTensor<T>&);                                   \
  template BasicTensor<T> l2_norm(const BasicTensor<T>&, std::size_t);                      \
  template BasicTensor<T> im2col(const BasicTensor<T>&, std::size_t, std::size_t,           \
                                 std::size_t, std::size_t, std::size_t);

PCUP_INSTANTIATE_OPS(float)
PCUP_INSTANTIATE_OPS(double)

#undef PCUP_INSTANTIATE_OPS

}  // namespace pcup
