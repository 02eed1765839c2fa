#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <vector>

#include "stbeamsnet/tensor.hpp"

// Primitive tensor ops with recorded backward steps. Forward math uses Eigen
// maps over the tensors' row-major buffers; gradients are accumulated (+=)
// so a parameter used twice receives the sum of both paths.

namespace stbn::nn {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

namespace detail {

template <typename T>
inline void require_2d(const Tensor<T>& t, const char* op) {
  if (t.ndim() != 2) {
    throw ShapeError(std::string(op) + ": expected a 2-d tensor, got " + shape_str(t.shape()));
  }
}

}  // namespace detail

/// Standard matrix product a[m×k] · b[k×p].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, Tape<T>& tape) {
  detail::require_2d(a, "matmul");
  detail::require_2d(b, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  Tensor<T> out = Tensor<T>::uninitialized({m, p});
  MatMap<T>(out.data(), m, p).noalias() =
      ConstMatMap<T>(a.data(), m, k) * ConstMatMap<T>(b.data(), k, p);
  if (tape.recording()) {
    tape.track_output(out);
    tape.record([a = a, b = b, out = out, m = m, k = k, p = p]() mutable {
      ConstMatMap<T> g(out.grad(), m, p);
      if (a.has_grad()) {
        MatMap<T>(a.grad(), m, k).noalias() += g * ConstMatMap<T>(b.data(), k, p).transpose();
      }
      if (b.has_grad()) {
        MatMap<T>(b.grad(), k, p).noalias() += ConstMatMap<T>(a.data(), m, k).transpose() * g;
      }
    });
  }
  return out;
}

/// x[n×d] · w[d×p] + bias[p] (bias broadcast over rows).
template <typename T>
Tensor<T> affine(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, Tape<T>& tape) {
  detail::require_2d(x, "affine");
  detail::require_2d(w, "affine");
  if (x.dim(1) != w.dim(0) || bias.numel() != w.dim(1)) {
    throw ShapeError("affine: shapes disagree: x " + shape_str(x.shape()) + ", w " +
                     shape_str(w.shape()) + ", bias " + shape_str(bias.shape()));
  }
  const std::size_t n = x.dim(0), d = x.dim(1), p = w.dim(1);
  Tensor<T> out = Tensor<T>::uninitialized({n, p});
  MatMap<T> om(out.data(), n, p);
  om.noalias() = ConstMatMap<T>(x.data(), n, d) * ConstMatMap<T>(w.data(), d, p);
  om.rowwise() += Eigen::Map<const Eigen::RowVectorX<T>>(bias.data(), p);
  if (tape.recording()) {
    tape.track_output(out);
    tape.record([x = x, w = w, bias = bias, out = out, n = n, d = d, p = p]() mutable {
      ConstMatMap<T> g(out.grad(), n, p);
      if (x.has_grad()) {
        MatMap<T>(x.grad(), n, d).noalias() += g * ConstMatMap<T>(w.data(), d, p).transpose();
      }
      if (w.has_grad()) {
        MatMap<T>(w.grad(), d, p).noalias() += ConstMatMap<T>(x.data(), n, d).transpose() * g;
      }
      if (bias.has_grad()) {
        Eigen::Map<Eigen::RowVectorX<T>>(bias.grad(), p) += g.colwise().sum();
      }
    });
  }
  return out;
}

/// Elementwise sum of two same-shape tensors.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b, Tape<T>& tape) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shapes disagree: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  Tensor<T> out = Tensor<T>::uninitialized(a.shape());
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
  if (tape.recording()) {
    tape.track_output(out);
    tape.record([a = a, b = b, out = out, n = n]() mutable {
      if (a.has_grad())
        for (std::size_t i = 0; i < n; ++i) a.grad()[i] += out.grad()[i];
      if (b.has_grad())
        for (std::size_t i = 0; i < n; ++i) b.grad()[i] += out.grad()[i];
    });
  }
  return out;
}

/// Multiplication by a compile-time-known constant.
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c, Tape<T>& tape) {
  Tensor<T> out = Tensor<T>::uninitialized(a.shape());
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * c;
  if (tape.recording()) {
    tape.track_output(out);
    tape.record([a = a, out = out, c = c, n = n]() mutable {
      if (a.has_grad())
        for (std::size_t i = 0; i < n; ++i) a.grad()[i] += c * out.grad()[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a, Tape<T>& tape) {
  detail::require_2d(a, "transpose");
  const std::size_t n = a.dim(0), d = a.dim(1);
  Tensor<T> out = Tensor<T>::uninitialized({d, n});
  MatMap<T>(out.data(), d, n).noalias() = ConstMatMap<T>(a.data(), n, d).transpose();
  if (tape.recording()) {
    tape.track_output(out);
    tape.record([a = a, out = out, n = n, d = d]() mutable {
      if (a.has_grad()) {
        MatMap<T>(a.grad(), n, d).noalias() += ConstMatMap<T>(out.grad(), d, n).transpose();
      }
    });
  }
  return out;
}

/// Elementwise max(0, x). Gradient at exactly 0 is 0.
template <typename T>
Tensor<T> relu(const Tensor<T>& x, Tape<T>& tape) {
  Tensor<T> out = Tensor<T>::uninitialized(x.shape());
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  if (tape.recording()) {
    tape.track_output(out);
    tape.record([x = x, out = out, n = n]() mutable {
      if (x.has_grad())
        for (std::size_t i = 0; i < n; ++i)
          if (x[i] > T(0)) x.grad()[i] += out.grad()[i];
    });
  }
  return out;
}

/// Row-wise softmax along the last axis, computed with max-subtraction.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& z, Tape<T>& tape) {
  if (z.ndim() == 0 || z.numel() == 0) throw ShapeError("softmax: empty tensor");
  const std::size_t m = z.shape().back();
  const std::size_t rows = z.numel() / m;
  Tensor<T> out = Tensor<T>::uninitialized(z.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* zr = z.data() + r * m;
    T* yr = out.data() + r * m;
    T zmax = zr[0];
    for (std::size_t j = 1; j < m; ++j) zmax = std::max(zmax, zr[j]);
    T sum = T(0);
    for (std::size_t j = 0; j < m; ++j) {
      yr[j] = std::exp(zr[j] - zmax);
      sum += yr[j];
    }
    for (std::size_t j = 0; j < m; ++j) yr[j] /= sum;
  }
  if (tape.recording()) {
    tape.track_output(out);
    tape.record([z = z, out = out, rows = rows, m = m]() mutable {
      if (!z.has_grad()) return;
      // dz_j = y_j * (g_j - sum_i g_i y_i) per row
      for (std::size_t r = 0; r < rows; ++r) {
        const T* yr = out.data() + r * m;
        const T* gr = out.grad() + r * m;
        T dot = T(0);
        for (std::size_t j = 0; j < m; ++j) dot += gr[j] * yr[j];
        T* dz = z.grad() + r * m;
        for (std::size_t j = 0; j < m; ++j) dz[j] += yr[j] * (gr[j] - dot);
      }
    });
  }
  return out;
}

/// Per-row standardization of x[n×d] (population variance, eps inside the
/// square root) followed by the per-feature affine gain/shift.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& shift,
                     Tape<T>& tape, T eps = T(1e-5)) {
  detail::require_2d(x, "layer_norm");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (gain.numel() != d || shift.numel() != d) {
    throw ShapeError("layer_norm: gain/shift must have " + std::to_string(d) + " entries, got " +
                     shape_str(gain.shape()) + " and " + shape_str(shift.shape()));
  }
  Tensor<T> out = Tensor<T>::uninitialized({n, d});
  Tensor<T> xhat = Tensor<T>::uninitialized({n, d});  // saved for backward
  Tensor<T> inv_std = Tensor<T>::uninitialized({n});
  for (std::size_t r = 0; r < n; ++r) {
    const T* xr = x.data() + r * d;
    T mean = T(0);
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= T(d);
    T var = T(0);
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= T(d);
    const T istd = T(1) / std::sqrt(var + eps);
    inv_std[r] = istd;
    for (std::size_t j = 0; j < d; ++j) {
      const T xh = (xr[j] - mean) * istd;
      xhat.data()[r * d + j] = xh;
      out.data()[r * d + j] = gain[j] * xh + shift[j];
    }
  }
  if (tape.recording()) {
    tape.track_output(out);
    tape.record([x = x, gain = gain, shift = shift, out = out, xhat = xhat, inv_std = inv_std, n = n, d = d]() mutable {
      for (std::size_t r = 0; r < n; ++r) {
        const T* gr = out.grad() + r * d;
        const T* xh = xhat.data() + r * d;
        if (gain.has_grad())
          for (std::size_t j = 0; j < d; ++j) gain.grad()[j] += gr[j] * xh[j];
        if (shift.has_grad())
          for (std::size_t j = 0; j < d; ++j) shift.grad()[j] += gr[j];
        if (x.has_grad()) {
          T mean_gy = T(0), mean_gyx = T(0);
          for (std::size_t j = 0; j < d; ++j) {
            const T gy = gr[j] * gain[j];
            mean_gy += gy;
            mean_gyx += gy * xh[j];
          }
          mean_gy /= T(d);
          mean_gyx /= T(d);
          T* dx = x.grad() + r * d;
          for (std::size_t j = 0; j < d; ++j) {
            const T gy = gr[j] * gain[j];
            dx[j] += inv_std[r] * (gy - mean_gy - xh[j] * mean_gyx);
          }
        }
      }
    });
  }
  return out;
}

/// 1-d cross-correlation (no kernel flip) of x[C×L] with kernels[D×C×alpha]
/// at the given stride, plus a per-filter bias: out[D×N], N = (L-alpha)/stride + 1.
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias,
                 std::size_t stride, Tape<T>& tape) {
  detail::require_2d(x, "conv1d");
  if (kernels.ndim() != 3) {
    throw ShapeError("conv1d: kernels must be [filters, channels, width], got " +
                     shape_str(kernels.shape()));
  }
  const std::size_t c = x.dim(0), l = x.dim(1);
  const std::size_t filters = kernels.dim(0), kc = kernels.dim(1), alpha = kernels.dim(2);
  if (kc != c) {
    throw ShapeError("conv1d: input has " + std::to_string(c) + " channels but kernels expect " +
                     std::to_string(kc));
  }
  if (l < alpha) {
    throw ShapeError("conv1d: input length " + std::to_string(l) + " shorter than kernel width " +
                     std::to_string(alpha));
  }
  if (stride == 0) throw ShapeError("conv1d: stride must be positive");
  if (bias.numel() != filters) {
    throw ShapeError("conv1d: bias must have one entry per filter, got " +
                     shape_str(bias.shape()));
  }
  const std::size_t n_out = (l - alpha) / stride + 1;
  const std::size_t patch = c * alpha;

  // im2col: cols[n, ch*alpha + a] = x[ch, n*stride + a]
  Tensor<T> cols = Tensor<T>::uninitialized({n_out, patch});
  for (std::size_t n = 0; n < n_out; ++n) {
    T* row = cols.data() + n * patch;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* src = x.data() + ch * l + n * stride;
      for (std::size_t a = 0; a < alpha; ++a) row[ch * alpha + a] = src[a];
    }
  }

  Tensor<T> out = Tensor<T>::uninitialized({filters, n_out});
  MatMap<T> om(out.data(), filters, n_out);
  om.noalias() =
      ConstMatMap<T>(kernels.data(), filters, patch) * ConstMatMap<T>(cols.data(), n_out, patch).transpose();
  om.colwise() += Eigen::Map<const Eigen::VectorX<T>>(bias.data(), filters);

  if (tape.recording()) {
    tape.track_output(out);
    tape.record([x = x, kernels = kernels, bias = bias, out = out, cols = cols, c = c, l = l, filters = filters, alpha = alpha, stride = stride, n_out = n_out, patch = patch]() mutable {
      ConstMatMap<T> g(out.grad(), filters, n_out);
      if (kernels.has_grad()) {
        MatMap<T>(kernels.grad(), filters, patch).noalias() +=
            g * ConstMatMap<T>(cols.data(), n_out, patch);
      }
      if (bias.has_grad()) {
        Eigen::Map<Eigen::VectorX<T>>(bias.grad(), filters) += g.rowwise().sum();
      }
      if (x.has_grad()) {
        Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> dcols =
            g.transpose() * ConstMatMap<T>(kernels.data(), filters, patch);
        for (std::size_t n = 0; n < n_out; ++n) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            T* dst = x.grad() + ch * l + n * stride;
            for (std::size_t a = 0; a < alpha; ++a) dst[a] += dcols(n, ch * alpha + a);
          }
        }
      }
    });
  }
  return out;
}

/// Columns [c0, c1) of x as a new tensor.
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t c0, std::size_t c1, Tape<T>& tape) {
  detail::require_2d(x, "slice_cols");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (c0 >= c1 || c1 > d) {
    throw ShapeError("slice_cols: range [" + std::to_string(c0) + "," + std::to_string(c1) +
                     ") invalid for " + shape_str(x.shape()));
  }
  const std::size_t w = c1 - c0;
  Tensor<T> out = Tensor<T>::uninitialized({n, w});
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(x.data() + r * d + c0, w, out.data() + r * w);
  }
  if (tape.recording()) {
    tape.track_output(out);
    tape.record([x = x, out = out, n = n, d = d, c0 = c0, w = w]() mutable {
      if (!x.has_grad()) return;
      for (std::size_t r = 0; r < n; ++r) {
        T* dst = x.grad() + r * d + c0;
        const T* src = out.grad() + r * w;
        for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
      }
    });
  }
  return out;
}

/// Horizontal concatenation of same-height blocks.
template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts, Tape<T>& tape) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t n = parts.front().dim(0);
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require_2d(p, "concat_cols");
    if (p.dim(0) != n) {
      throw ShapeError("concat_cols: row counts disagree: " + shape_str(parts.front().shape()) +
                       " vs " + shape_str(p.shape()));
    }
    total += p.dim(1);
  }
  Tensor<T> out = Tensor<T>::uninitialized({n, total});
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(1);
    for (std::size_t r = 0; r < n; ++r) {
      std::copy_n(p.data() + r * w, w, out.data() + r * total + off);
    }
    off += w;
  }
  if (tape.recording()) {
    tape.track_output(out);
    tape.record([parts = parts, out = out, n = n, total = total]() mutable {
      std::size_t off = 0;
      for (auto& p : parts) {
        const std::size_t w = p.dim(1);
        if (p.has_grad()) {
          for (std::size_t r = 0; r < n; ++r) {
            T* dst = p.grad() + r * w;
            const T* src = out.grad() + r * total + off;
            for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
          }
        }
        off += w;
      }
    });
  }
  return out;
}

/// Mean of squared componentwise error over all entries; scalar output.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target, Tape<T>& tape) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("mse_loss: shapes disagree: " + shape_str(pred.shape()) + " vs " +
                     shape_str(target.shape()));
  }
  const std::size_t n = pred.numel();
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    const T e = pred[i] - target[i];
    acc += e * e;
  }
  Tensor<T> out = Tensor<T>::scalar(acc / T(n));
  if (tape.recording()) {
    tape.track_output(out);
    tape.record([pred = pred, target = target, out = out, n = n]() mutable {
      const T g = out.grad()[0] * T(2) / T(n);
      for (std::size_t i = 0; i < n; ++i) {
        const T e = pred[i] - target[i];
        if (pred.has_grad()) pred.grad()[i] += g * e;
        if (target.has_grad()) target.grad()[i] -= g * e;
      }
    });
  }
  return out;
}

/// Sum of all entries; scalar output.
template <typename T>
Tensor<T> sum_all(const Tensor<T>& x, Tape<T>& tape) {
  const std::size_t n = x.numel();
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  Tensor<T> out = Tensor<T>::scalar(acc);
  if (tape.recording()) {
    tape.track_output(out);
    tape.record([x = x, out = out, n = n]() mutable {
      if (!x.has_grad()) return;
      const T g = out.grad()[0];
      for (std::size_t i = 0; i < n; ++i) x.grad()[i] += g;
    });
  }
  return out;
}

}  // namespace stbn::nn
