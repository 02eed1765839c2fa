#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "stbeamsnet/errors.hpp"
#include "stbeamsnet/ops.hpp"
#include "stbeamsnet/rng.hpp"
#include "stbeamsnet/tensor.hpp"

// Set-Transformer building blocks: token embedding via 1-d convolution,
// scaled dot-product attention, multihead attention, MAB/SAB residual
// post-norm blocks, PMA aggregation, and the encoder/decoder compositions.

namespace stbn::st {

using nn::Tape;
using nn::Tensor;

struct Hyperparams {
  std::size_t kernel_size = 2;   // alpha
  std::size_t stride = 1;        // beta
  std::size_t patch_size = 1;    // gamma; only 1 is supported (tokens are raw time steps)
  std::size_t latent_dim = 128;  // D, equal to the token dimension d
  std::size_t heads = 8;         // h
  std::size_t ffe = 256;         // feed-forward expansion
  std::size_t blocks = 2;        // stacked SABs in the encoder
  std::size_t seeds = 3;         // k aggregation vectors

  std::size_t head_dim() const { return latent_dim / heads; }

  void validate() const {
    if (kernel_size == 0 || stride == 0 || latent_dim == 0 || heads == 0 || ffe == 0 ||
        blocks == 0 || seeds == 0) {
      throw ConfigError("hyperparams: all values must be positive");
    }
    if (patch_size != 1) {
      throw ConfigError("hyperparams: only patch size 1 is supported");
    }
    if (latent_dim % heads != 0) {
      throw ConfigError("hyperparams: latent dim " + std::to_string(latent_dim) +
                        " not divisible by " + std::to_string(heads) + " heads");
    }
  }
};

template <typename T>
struct LayerNormParams {
  Tensor<T> gain, shift;
};

template <typename T>
struct FfnParams {
  Tensor<T> w1, b1, w2, b2;  // d -> ffe -> d
};

template <typename T>
struct MultiheadParams {
  // Per-head projections stored fused as d x d matrices; head j owns the
  // column block [j*d/h, (j+1)*d/h).
  Tensor<T> wq, wk, wv, wo;
};

template <typename T>
struct MabParams {
  MultiheadParams<T> mha;
  LayerNormParams<T> ln1, ln2;
  FfnParams<T> ffn;
};

template <typename T>
struct PmaParams {
  Tensor<T> seed_vectors;  // k x d, trainable
  FfnParams<T> ffn;        // applied to the set before aggregation
  MabParams<T> mab;
};

template <typename T>
struct PatchEmbedParams {
  Tensor<T> kernels;  // D x C_in x alpha
  Tensor<T> bias;     // D
};

template <typename T>
struct EncoderParams {
  std::vector<MabParams<T>> sabs;
};

template <typename T>
struct DecoderParams {
  PmaParams<T> pma;
  MabParams<T> sab;
  FfnParams<T> ffn;
};

// ---- initialization ------------------------------------------------------

template <typename T>
Tensor<T> uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out,
                       Rng& rng) {
  Tensor<T> t(std::move(shape), true);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::size_t i = 0; i < t.numel(); ++i) {
    t[i] = static_cast<T>(rng.uniform(-bound, bound));
  }
  return t;
}

template <typename T>
Tensor<T> zeros_param(std::vector<std::size_t> shape) {
  return Tensor<T>(std::move(shape), true);
}

template <typename T>
Tensor<T> ones_param(std::vector<std::size_t> shape) {
  Tensor<T> t(std::move(shape), true);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = T(1);
  return t;
}

template <typename T>
LayerNormParams<T> make_layer_norm_params(std::size_t d) {
  return {ones_param<T>({d}), zeros_param<T>({d})};
}

template <typename T>
FfnParams<T> make_ffn_params(std::size_t d, std::size_t ffe, Rng& rng) {
  return {uniform_init<T>({d, ffe}, d, ffe, rng), zeros_param<T>({ffe}),
          uniform_init<T>({ffe, d}, ffe, d, rng), zeros_param<T>({d})};
}

template <typename T>
MultiheadParams<T> make_multihead_params(std::size_t d, Rng& rng) {
  return {uniform_init<T>({d, d}, d, d, rng), uniform_init<T>({d, d}, d, d, rng),
          uniform_init<T>({d, d}, d, d, rng), uniform_init<T>({d, d}, d, d, rng)};
}

template <typename T>
MabParams<T> make_mab_params(std::size_t d, std::size_t ffe, Rng& rng) {
  return {make_multihead_params<T>(d, rng), make_layer_norm_params<T>(d),
          make_layer_norm_params<T>(d), make_ffn_params<T>(d, ffe, rng)};
}

template <typename T>
PmaParams<T> make_pma_params(std::size_t k, std::size_t d, std::size_t ffe, Rng& rng) {
  Tensor<T> seeds({k, d}, true);
  for (std::size_t i = 0; i < seeds.numel(); ++i) {
    seeds[i] = static_cast<T>(rng.gaussian() * 0.02);
  }
  return {seeds, make_ffn_params<T>(d, ffe, rng), make_mab_params<T>(d, ffe, rng)};
}

template <typename T>
PatchEmbedParams<T> make_patch_embed_params(std::size_t channels, const Hyperparams& hp,
                                            Rng& rng) {
  return {uniform_init<T>({hp.latent_dim, channels, hp.kernel_size}, channels * hp.kernel_size,
                          hp.latent_dim, rng),
          zeros_param<T>({hp.latent_dim})};
}

template <typename T>
EncoderParams<T> make_encoder_params(const Hyperparams& hp, Rng& rng) {
  EncoderParams<T> enc;
  for (std::size_t i = 0; i < hp.blocks; ++i) {
    enc.sabs.push_back(make_mab_params<T>(hp.latent_dim, hp.ffe, rng));
  }
  return enc;
}

template <typename T>
DecoderParams<T> make_decoder_params(const Hyperparams& hp, Rng& rng) {
  return {make_pma_params<T>(hp.seeds, hp.latent_dim, hp.ffe, rng),
          make_mab_params<T>(hp.latent_dim, hp.ffe, rng),
          make_ffn_params<T>(hp.latent_dim, hp.ffe, rng)};
}

// ---- parameter enumeration ------------------------------------------------

template <typename T>
using ParamVisitor = std::function<void(const std::string&, Tensor<T>&)>;

template <typename T>
void visit_params(LayerNormParams<T>& p, const std::string& prefix, const ParamVisitor<T>& fn) {
  fn(prefix + ".gain", p.gain);
  fn(prefix + ".shift", p.shift);
}

template <typename T>
void visit_params(FfnParams<T>& p, const std::string& prefix, const ParamVisitor<T>& fn) {
  fn(prefix + ".w1", p.w1);
  fn(prefix + ".b1", p.b1);
  fn(prefix + ".w2", p.w2);
  fn(prefix + ".b2", p.b2);
}

template <typename T>
void visit_params(MultiheadParams<T>& p, const std::string& prefix, const ParamVisitor<T>& fn) {
  fn(prefix + ".wq", p.wq);
  fn(prefix + ".wk", p.wk);
  fn(prefix + ".wv", p.wv);
  fn(prefix + ".wo", p.wo);
}

template <typename T>
void visit_params(MabParams<T>& p, const std::string& prefix, const ParamVisitor<T>& fn) {
  visit_params(p.mha, prefix, fn);
  visit_params(p.ln1, prefix + ".ln1", fn);
  visit_params(p.ln2, prefix + ".ln2", fn);
  visit_params(p.ffn, prefix + ".ffn", fn);
}

template <typename T>
void visit_params(PmaParams<T>& p, const std::string& prefix, const ParamVisitor<T>& fn) {
  fn(prefix + ".seeds", p.seed_vectors);
  visit_params(p.ffn, prefix + ".ffn", fn);
  visit_params(p.mab, prefix + ".mab", fn);
}

template <typename T>
void visit_params(PatchEmbedParams<T>& p, const std::string& prefix, const ParamVisitor<T>& fn) {
  fn(prefix + ".kernels", p.kernels);
  fn(prefix + ".bias", p.bias);
}

template <typename T>
void visit_params(EncoderParams<T>& p, const std::string& prefix, const ParamVisitor<T>& fn) {
  for (std::size_t i = 0; i < p.sabs.size(); ++i) {
    visit_params(p.sabs[i], prefix + ".sab" + std::to_string(i + 1), fn);
  }
}

template <typename T>
void visit_params(DecoderParams<T>& p, const std::string& prefix, const ParamVisitor<T>& fn) {
  visit_params(p.pma, prefix + ".pma", fn);
  visit_params(p.sab, prefix + ".sab", fn);
  visit_params(p.ffn, prefix + ".ffn", fn);
}

// ---- blocks ----------------------------------------------------------------

/// Tokenize a C_in x L window: 1-d convolution, then transpose so each of the
/// N = (L-alpha)/beta + 1 output positions becomes one d-dimensional token.
template <typename T>
Tensor<T> patch_embed(const Tensor<T>& x, const PatchEmbedParams<T>& p, const Hyperparams& hp,
                      Tape<T>& tape) {
  hp.validate();
  Tensor<T> conv = nn::conv1d(x, p.kernels, p.bias, hp.stride, tape);
  return nn::transpose(conv, tape);
}

/// Scaled dot-product attention Softmax(Q K^T / sqrt(d_q)) V with row-wise
/// softmax over the keys.
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, Tape<T>& tape) {
  nn::detail::require_2d(q, "attention");
  nn::detail::require_2d(k, "attention");
  nn::detail::require_2d(v, "attention");
  if (q.dim(1) != k.dim(1)) {
    throw ShapeError("attention: query dim " + nn::shape_str(q.shape()) +
                     " does not match key dim " + nn::shape_str(k.shape()));
  }
  if (k.dim(0) != v.dim(0)) {
    throw ShapeError("attention: key count " + nn::shape_str(k.shape()) +
                     " does not match value count " + nn::shape_str(v.shape()));
  }
  Tensor<T> scores = nn::matmul(q, nn::transpose(k, tape), tape);
  scores = nn::scale(scores, static_cast<T>(1.0 / std::sqrt(static_cast<double>(q.dim(1)))), tape);
  Tensor<T> weights = nn::softmax_rows(scores, tape);
  return nn::matmul(weights, v, tape);
}

/// Multihead attention: fused projections, per-head scaled dot-product
/// attention over column blocks of d/h, concatenation, output projection.
template <typename T>
Tensor<T> multihead(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    const MultiheadParams<T>& p, std::size_t heads, Tape<T>& tape) {
  const std::size_t d = p.wq.dim(1);
  if (d % heads != 0) {
    throw ConfigError("multihead: dim " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  Tensor<T> qp = nn::matmul(q, p.wq, tape);
  Tensor<T> kp = nn::matmul(k, p.wk, tape);
  Tensor<T> vp = nn::matmul(v, p.wv, tape);
  const std::size_t hd = d / heads;
  std::vector<Tensor<T>> head_outputs;
  head_outputs.reserve(heads);
  for (std::size_t j = 0; j < heads; ++j) {
    const std::size_t c0 = j * hd, c1 = (j + 1) * hd;
    head_outputs.push_back(attention(nn::slice_cols(qp, c0, c1, tape),
                                     nn::slice_cols(kp, c0, c1, tape),
                                     nn::slice_cols(vp, c0, c1, tape), tape));
  }
  return nn::matmul(concat_cols(head_outputs, tape), p.wo, tape);
}

/// Position-wise feed-forward network: relu(x W1 + b1) W2 + b2.
template <typename T>
Tensor<T> ffn(const Tensor<T>& x, const FfnParams<T>& p, Tape<T>& tape) {
  return nn::affine(nn::relu(nn::affine(x, p.w1, p.b1, tape), tape), p.w2, p.b2, tape);
}

/// Multihead attention block with post-norm residuals:
/// L = LayerNorm(X + Multihead(X, Y, Y)); out = LayerNorm(L + FFN(L)).
template <typename T>
Tensor<T> mab(const Tensor<T>& x, const Tensor<T>& y, const MabParams<T>& p, std::size_t heads,
              Tape<T>& tape) {
  if (x.ndim() != 2 || y.ndim() != 2 || x.dim(1) != y.dim(1)) {
    throw ShapeError("mab: X " + nn::shape_str(x.shape()) + " and Y " + nn::shape_str(y.shape()) +
                     " must be 2-d with one shared feature dim");
  }
  Tensor<T> l =
      nn::layer_norm(nn::add(x, multihead(x, y, y, p.mha, heads, tape), tape), p.ln1.gain,
                     p.ln1.shift, tape);
  return nn::layer_norm(nn::add(l, ffn(l, p.ffn, tape), tape), p.ln2.gain, p.ln2.shift, tape);
}

/// Self-attention block: MAB(X, X).
template <typename T>
Tensor<T> sab(const Tensor<T>& x, const MabParams<T>& p, std::size_t heads, Tape<T>& tape) {
  return mab(x, x, p, heads, tape);
}

/// Pooling by multihead attention: MAB(S, FFN(Z)) with trainable seeds S.
/// Output has k rows regardless of the size of the input set.
template <typename T>
Tensor<T> pma(const Tensor<T>& z, const PmaParams<T>& p, std::size_t heads, Tape<T>& tape) {
  if (z.ndim() != 2 || z.dim(0) < 1) {
    throw ShapeError("pma: input set must be a non-empty 2-d tensor, got " +
                     nn::shape_str(z.shape()));
  }
  return mab(p.seed_vectors, ffn(z, p.ffn, tape), p.mab, heads, tape);
}

/// Stacked SAB blocks.
template <typename T>
Tensor<T> encoder(const Tensor<T>& x, const EncoderParams<T>& p, std::size_t heads,
                  Tape<T>& tape) {
  if (p.sabs.empty()) throw ConfigError("encoder: needs at least one SAB block");
  Tensor<T> z = x;
  for (const auto& block : p.sabs) z = sab(z, block, heads, tape);
  return z;
}

/// Aggregation decoder: FFN(SAB(PMA_k(Z))), a k x d output.
template <typename T>
Tensor<T> decoder(const Tensor<T>& z, const DecoderParams<T>& p, std::size_t heads,
                  Tape<T>& tape) {
  return ffn(sab(pma(z, p.pma, heads, tape), p.sab, heads, tape), p.ffn, tape);
}

}  // namespace stbn::st
