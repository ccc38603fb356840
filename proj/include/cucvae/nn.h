// Building blocks shared by the encoder, variational heads and decoder.
#ifndef CUCVAE_NN_H_
#define CUCVAE_NN_H_

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "cucvae/autograd.h"

namespace cucvae::nn {

using Rng = std::mt19937_64;

// Named, ordered collection of trainable tensors. Insertion order is the
// serialization order.
class ParameterStore {
 public:
  ag::Var create(const std::string& name, Matrix init);
  ag::Var get(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<std::pair<std::string, ag::Var>>& entries() const {
    return entries_;
  }
  void zero_grad();
  std::size_t scalar_count() const;

 private:
  std::vector<std::pair<std::string, ag::Var>> entries_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

// Per-forward settings. Dropout is only applied when training and an RNG
// is supplied.
struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  Rng* dropout_rng = nullptr;
};

ag::Var dropout(const ag::Var& x, const ForwardContext& ctx);

Matrix xavier_uniform(Index fan_in, Index fan_out, Rng& rng);
Matrix sinusoid_table(Index length, Index dim);

class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, Index in, Index out,
         Rng& rng, bool bias = true);
  ag::Var operator()(const ag::Var& x) const;
  const ag::Var& weight() const { return weight_; }
  const ag::Var& bias() const { return bias_; }

 private:
  ag::Var weight_;
  ag::Var bias_;
};

// 1D convolution along the row (time or phoneme) axis, "same" padding.
// Weight layout is [kernel*in x out] matching ag::unfold_time.
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(ParameterStore& store, const std::string& name, Index in, Index out,
         Index kernel, Rng& rng);
  ag::Var operator()(const ag::Var& x) const;
  Index kernel() const { return kernel_; }
  const ag::Var& weight() const { return weight_; }
  const ag::Var& bias() const { return bias_; }

 private:
  ag::Var weight_;
  ag::Var bias_;
  Index kernel_ = 1;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, Index dim);
  ag::Var operator()(const ag::Var& x) const;

 private:
  ag::Var gamma_;
  ag::Var beta_;
};

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore& store, const std::string& name,
                     Index query_dim, Index kv_dim, Index model_dim,
                     Index heads, Rng& rng);

  // query [T x query_dim], memory [S x kv_dim] -> [T x model_dim].
  // When `weights` is non-null it receives the per-head [T x S] softmax.
  ag::Var operator()(const ag::Var& query, const ag::Var& memory,
                     std::vector<Matrix>* weights = nullptr) const;

  Index heads() const { return heads_; }
  const Linear& q() const { return q_; }
  const Linear& k() const { return k_; }
  const Linear& v() const { return v_; }
  const Linear& out() const { return out_; }

 private:
  Linear q_, k_, v_, out_;
  Index heads_ = 1;
  Index model_dim_ = 0;
};

// Feed-forward Transformer block: self-attention and a conv FFN, each with a
// residual connection followed by layer norm.
class FftBlock {
 public:
  FftBlock() = default;
  FftBlock(ParameterStore& store, const std::string& name, Index model_dim,
           Index heads, Index ffn_dim, Index kernel, Rng& rng);
  ag::Var operator()(const ag::Var& x, const ForwardContext& ctx) const;

 private:
  MultiHeadAttention attn_;
  LayerNorm norm1_, norm2_;
  Conv1d ffn_in_, ffn_out_;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts) {}
  void step(ParameterStore& store);

  std::int64_t steps() const { return t_; }
  const AdamOptions& options() const { return opts_; }
  // First/second moment per parameter, same order as the store.
  std::vector<Matrix>& first_moments() { return m_; }
  std::vector<Matrix>& second_moments() { return v_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }
  void ensure_state(const ParameterStore& store);

 private:
  AdamOptions opts_;
  std::int64_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace cucvae::nn

#endif  // CUCVAE_NN_H_
