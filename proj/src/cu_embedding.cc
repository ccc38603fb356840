#include "cucvae/cu_embedding.h"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

#include "cucvae/lexicon.h"
#include "json.hpp"

namespace cucvae {
namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Box-Muller on raw engine output so vectors do not depend on the standard
// library's distribution implementation.
Vector gaussian_vector(Index dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  constexpr double kScale = 1.0 / 18446744073709551616.0;  // 2^-64
  Vector v(dim);
  for (Index i = 0; i < dim; i += 2) {
    const double u1 = (static_cast<double>(rng()) + 0.5) * kScale;
    const double u2 = (static_cast<double>(rng()) + 0.5) * kScale;
    const double r = std::sqrt(-2.0 * std::log(u1));
    v(i) = r * std::cos(2.0 * std::numbers::pi * u2);
    if (i + 1 < dim) v(i + 1) = r * std::sin(2.0 * std::numbers::pi * u2);
  }
  return v;
}

}  // namespace

StubContextEncoder::StubContextEncoder(Index dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim < 1) throw std::invalid_argument("context encoder dim must be positive");
}

Vector StubContextEncoder::token_vector(const std::string& token) const {
  return gaussian_vector(dim_, fnv1a(token) ^ seed_);
}

Vector StubContextEncoder::encode(const std::string& pair_text) const {
  std::istringstream in(pair_text);
  std::string token;
  Vector sum = Vector::Zero(dim_);
  int count = 0;
  while (in >> token) {
    for (auto& c : token) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    sum += token_vector(token);
    ++count;
  }
  if (count == 0) return token_vector(std::string("\x01<empty>"));
  return sum / count;
}

std::string sha256_hex(const std::string& text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

CachedContextEncoder::CachedContextEncoder(const std::filesystem::path& cache) {
  std::ifstream in(cache);
  if (!in) throw std::runtime_error("cannot open " + cache.string());
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(cache.string(), lineno, e.what());
    }
    if (!obj.contains("pair_text_sha256") || !obj.contains("vector") ||
        !obj["vector"].is_array()) {
      throw ParseError(cache.string(), lineno, "expected {pair_text_sha256, vector}");
    }
    const auto values = obj["vector"].get<std::vector<double>>();
    if (dim_ == 0) dim_ = static_cast<Index>(values.size());
    if (static_cast<Index>(values.size()) != dim_ || dim_ == 0) {
      throw ParseError(cache.string(), lineno, "inconsistent vector length");
    }
    vectors_[obj["pair_text_sha256"].get<std::string>()] =
        Eigen::Map<const Vector>(values.data(), dim_);
  }
}

Vector CachedContextEncoder::encode(const std::string& pair_text) const {
  auto it = vectors_.find(sha256_hex(pair_text));
  if (it == vectors_.end()) {
    throw std::out_of_range("embedding cache has no entry for pair: " + pair_text);
  }
  return it->second;
}

std::vector<std::string> build_pairs(const Utterance& utt) {
  std::vector<std::string> window = utt.neighbors_before;
  window.push_back(utt.text);
  window.insert(window.end(), utt.neighbors_after.begin(), utt.neighbors_after.end());
  std::vector<std::string> pairs;
  for (std::size_t k = 0; k + 1 < window.size(); ++k) {
    pairs.push_back("[CLS] " + window[k] + " [SEP] " + window[k + 1]);
  }
  return pairs;
}

Matrix embed_pairs(const ContextEncoder& encoder,
                   const std::vector<std::string>& pairs) {
  Matrix out(static_cast<Index>(pairs.size()), encoder.dim());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Vector v = encoder.encode(pairs[i]);
    if (v.size() != encoder.dim()) throw std::runtime_error("context encoder dim mismatch");
    out.row(static_cast<Index>(i)) = v.transpose();
  }
  return out;
}

DurationPredictor::DurationPredictor(nn::ParameterStore& store,
                                     const std::string& name, Index d_model,
                                     Index kernel, nn::Rng& rng) {
  conv1_ = nn::Conv1d(store, name + ".conv1", d_model, d_model, kernel, rng);
  norm1_ = nn::LayerNorm(store, name + ".norm1", d_model);
  conv2_ = nn::Conv1d(store, name + ".conv2", d_model, d_model, kernel, rng);
  norm2_ = nn::LayerNorm(store, name + ".norm2", d_model);
  out_ = nn::Linear(store, name + ".out", d_model, 1, rng);
}

ag::Var DurationPredictor::operator()(const ag::Var& h,
                                      const nn::ForwardContext& ctx) const {
  auto x = nn::dropout(norm1_(ag::relu(conv1_(h))), ctx);
  x = nn::dropout(norm2_(ag::relu(conv2_(x))), ctx);
  return out_(x);
}

CuEmbedding::CuEmbedding(nn::ParameterStore& store, const ModelConfig& config,
                         const std::vector<std::string>& speakers, nn::Rng& rng)
    : config_(config), speakers_(speakers) {
  config.validate();
  for (std::size_t i = 0; i < speakers_.size(); ++i) {
    if (!speaker_ids_.emplace(speakers_[i], static_cast<int>(i) + 1).second) {
      throw ValidationError("duplicate speaker id: " + speakers_[i]);
    }
  }
  const Index d = config.d_model;
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
  Matrix phon(static_cast<Index>(phoneme_inventory().size()), d);
  for (Index i = 0; i < phon.size(); ++i) phon.data()[i] = normal(rng);
  phoneme_table_ = store.create("cu.phoneme_embedding", std::move(phon));
  Matrix spk(static_cast<Index>(speakers_.size()) + 1, d);
  for (Index i = 0; i < spk.size(); ++i) spk.data()[i] = normal(rng);
  speaker_table_ = store.create("cu.speaker_embedding", std::move(spk));
  for (Index layer = 0; layer < config.n_enc_layers; ++layer) {
    encoder_.emplace_back(store, "cu.encoder" + std::to_string(layer), d,
                          config.n_heads, config.ffn_dim, config.conv_kernel, rng);
  }
  fusion_ = nn::MultiHeadAttention(store, "cu.fusion", d, config.d_ctx, d,
                                   config.fusion_heads, rng);
  projection_ = store.create("cu.projection", nn::xavier_uniform(2 * d, d, rng));
  duration_ = DurationPredictor(store, "cu.duration", d, config.duration_kernel, rng);
}

int CuEmbedding::speaker_index(const std::string& speaker) const {
  auto it = speaker_ids_.find(speaker);
  return it == speaker_ids_.end() ? 0 : it->second;
}

ag::Var CuEmbedding::encode_phonemes(const PhonemeTrack& track,
                                     const std::string& speaker,
                                     const nn::ForwardContext& ctx) const {
  if (track.size() == 0) throw std::invalid_argument("encode_phonemes: empty phoneme sequence");
  std::vector<Index> ids;
  ids.reserve(track.phonemes.size());
  for (const auto& p : track.phonemes) ids.push_back(phoneme_id(p));
  auto x = ag::gather_rows(phoneme_table_, ids);
  x = ag::add(x, ag::Var::constant(nn::sinusoid_table(x.rows(), x.cols())));
  for (const auto& block : encoder_) x = block(x, ctx);
  const std::vector<Index> spk(ids.size(), speaker_index(speaker));
  return ag::add(x, ag::gather_rows(speaker_table_, spk));
}

ag::Var CuEmbedding::fuse_context(const ag::Var& mixture, const Matrix& pairs,
                                  std::vector<Matrix>* attention) const {
  if (pairs.rows() == 0) {
    if (attention) attention->clear();
    return ag::Var::constant(Matrix::Zero(mixture.rows(), mixture.cols()));
  }
  if (pairs.cols() != config_.d_ctx) {
    throw std::invalid_argument("fuse_context: pair embedding width " +
                                std::to_string(pairs.cols()) + " != d_ctx " +
                                std::to_string(config_.d_ctx));
  }
  return fusion_(mixture, ag::Var::constant(pairs), attention);
}

CuHidden CuEmbedding::project_hidden(const ag::Var& fused, const ag::Var& mixture,
                                     const nn::ForwardContext& ctx) const {
  if (fused.rows() != mixture.rows()) {
    throw std::invalid_argument("project_hidden: row count mismatch");
  }
  CuHidden out;
  out.h = ag::matmul(ag::concat_cols({fused, mixture}), projection_);
  out.log_durations = duration_(out.h, ctx);
  return out;
}

CuHidden CuEmbedding::forward(const PhonemeTrack& track,
                              const std::string& speaker,
                              const Matrix& pair_embeddings,
                              const nn::ForwardContext& ctx) const {
  const auto mixture = encode_phonemes(track, speaker, ctx);
  const auto fused = fuse_context(mixture, pair_embeddings);
  return project_hidden(fused, mixture, ctx);
}

}  // namespace cucvae
