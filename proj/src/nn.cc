#include "cucvae/nn.h"

#include <cmath>
#include <stdexcept>

namespace cucvae::nn {

ag::Var ParameterStore::create(const std::string& name, Matrix init) {
  if (by_name_.count(name)) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  auto var = ag::Var::parameter(std::move(init));
  by_name_[name] = entries_.size();
  entries_.emplace_back(name, var);
  return var;
}

ag::Var ParameterStore::get(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::out_of_range("no parameter: " + name);
  return entries_[it->second].second;
}

bool ParameterStore::contains(const std::string& name) const {
  return by_name_.count(name) != 0;
}

void ParameterStore::zero_grad() {
  for (auto& [name, var] : entries_) var.zero_grad();
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, var] : entries_) n += var.value().size();
  return n;
}

ag::Var dropout(const ag::Var& x, const ForwardContext& ctx) {
  if (!ctx.training || ctx.dropout <= 0.0 || ctx.dropout_rng == nullptr) return x;
  std::bernoulli_distribution keep(1.0 - ctx.dropout);
  const double scale = 1.0 / (1.0 - ctx.dropout);
  Matrix mask(x.rows(), x.cols());
  for (Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = keep(*ctx.dropout_rng) ? scale : 0.0;
  }
  return ag::mul(x, ag::Var::constant(std::move(mask)));
}

Matrix xavier_uniform(Index fan_in, Index fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(fan_in, fan_out);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix sinusoid_table(Index length, Index dim) {
  Matrix table(length, dim);
  for (Index pos = 0; pos < length; ++pos) {
    for (Index i = 0; i < dim; ++i) {
      const double rate =
          std::pow(10000.0, -2.0 * static_cast<double>(i / 2) / static_cast<double>(dim));
      const double angle = static_cast<double>(pos) * rate;
      table(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return table;
}

Linear::Linear(ParameterStore& store, const std::string& name, Index in,
               Index out, Rng& rng, bool bias) {
  weight_ = store.create(name + ".weight", xavier_uniform(in, out, rng));
  if (bias) bias_ = store.create(name + ".bias", Matrix::Zero(1, out));
}

ag::Var Linear::operator()(const ag::Var& x) const {
  auto y = ag::matmul(x, weight_);
  return bias_.defined() ? ag::add_row(y, bias_) : y;
}

Conv1d::Conv1d(ParameterStore& store, const std::string& name, Index in,
               Index out, Index kernel, Rng& rng)
    : kernel_(kernel) {
  if (kernel < 1 || kernel % 2 == 0) {
    throw std::invalid_argument("Conv1d kernel must be odd and positive");
  }
  weight_ = store.create(name + ".weight", xavier_uniform(kernel * in, out, rng));
  bias_ = store.create(name + ".bias", Matrix::Zero(1, out));
}

ag::Var Conv1d::operator()(const ag::Var& x) const {
  const auto cols = kernel_ == 1 ? x : ag::unfold_time(x, kernel_);
  return ag::add_row(ag::matmul(cols, weight_), bias_);
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, Index dim) {
  gamma_ = store.create(name + ".gamma", Matrix::Ones(1, dim));
  beta_ = store.create(name + ".beta", Matrix::Zero(1, dim));
}

ag::Var LayerNorm::operator()(const ag::Var& x) const {
  return ag::layer_norm_rows(x, gamma_, beta_);
}

MultiHeadAttention::MultiHeadAttention(ParameterStore& store,
                                       const std::string& name, Index query_dim,
                                       Index kv_dim, Index model_dim,
                                       Index heads, Rng& rng)
    : heads_(heads), model_dim_(model_dim) {
  if (heads < 1 || model_dim % heads != 0) {
    throw std::invalid_argument("attention: model_dim must divide into heads");
  }
  q_ = Linear(store, name + ".q", query_dim, model_dim, rng);
  k_ = Linear(store, name + ".k", kv_dim, model_dim, rng);
  v_ = Linear(store, name + ".v", kv_dim, model_dim, rng);
  out_ = Linear(store, name + ".o", model_dim, model_dim, rng);
}

ag::Var MultiHeadAttention::operator()(const ag::Var& query,
                                       const ag::Var& memory,
                                       std::vector<Matrix>* weights) const {
  const auto q = q_(query);
  const auto k = k_(memory);
  const auto v = v_(memory);
  const Index head_dim = model_dim_ / heads_;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  if (weights) weights->clear();
  std::vector<ag::Var> heads;
  heads.reserve(static_cast<std::size_t>(heads_));
  for (Index h = 0; h < heads_; ++h) {
    const auto qh = ag::slice_cols(q, h * head_dim, head_dim);
    const auto kh = ag::slice_cols(k, h * head_dim, head_dim);
    const auto vh = ag::slice_cols(v, h * head_dim, head_dim);
    const auto scores = ag::scale(ag::matmul(qh, ag::transpose(kh)), inv_sqrt);
    const auto attn = ag::softmax_rows(scores);
    if (weights) weights->push_back(attn.value());
    heads.push_back(ag::matmul(attn, vh));
  }
  return out_(heads.size() == 1 ? heads.front() : ag::concat_cols(heads));
}

FftBlock::FftBlock(ParameterStore& store, const std::string& name,
                   Index model_dim, Index heads, Index ffn_dim, Index kernel,
                   Rng& rng) {
  attn_ = MultiHeadAttention(store, name + ".attn", model_dim, model_dim,
                             model_dim, heads, rng);
  norm1_ = LayerNorm(store, name + ".norm1", model_dim);
  ffn_in_ = Conv1d(store, name + ".ffn_in", model_dim, ffn_dim, kernel, rng);
  ffn_out_ = Conv1d(store, name + ".ffn_out", ffn_dim, model_dim, 1, rng);
  norm2_ = LayerNorm(store, name + ".norm2", model_dim);
}

ag::Var FftBlock::operator()(const ag::Var& x, const ForwardContext& ctx) const {
  auto h = norm1_(ag::add(x, dropout(attn_(x, x), ctx)));
  auto f = ffn_out_(ag::relu(ffn_in_(h)));
  return norm2_(ag::add(h, dropout(f, ctx)));
}

void Adam::ensure_state(const ParameterStore& store) {
  const auto& entries = store.entries();
  if (m_.size() == entries.size()) return;
  m_.clear();
  v_.clear();
  for (const auto& [name, var] : entries) {
    m_.push_back(Matrix::Zero(var.rows(), var.cols()));
    v_.push_back(Matrix::Zero(var.rows(), var.cols()));
  }
}

void Adam::step(ParameterStore& store) {
  ensure_state(store);
  ++t_;
  const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  const auto& entries = store.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ag::Var p = entries[i].second;  // shares the node
    const Matrix g = p.grad();
    m_[i] = opts_.beta1 * m_[i] + (1.0 - opts_.beta1) * g;
    v_[i] = opts_.beta2 * v_[i] + (1.0 - opts_.beta2) * g.cwiseAbs2();
    p.mutable_value().array() -= opts_.lr * (m_[i].array() / c1) /
                                 ((v_[i].array() / c2).sqrt() + opts_.eps);
  }
}

}  // namespace cucvae::nn
