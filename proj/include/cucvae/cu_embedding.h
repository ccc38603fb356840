// Cross-utterance embedding: phoneme encoder plus speaker embedding,
// attention over pair embeddings of the neighbor window, projection to the
// per-phoneme hidden sequence H and the duration predictor.
#ifndef CUCVAE_CU_EMBEDDING_H_
#define CUCVAE_CU_EMBEDDING_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "cucvae/corpus.h"
#include "cucvae/model_config.h"
#include "cucvae/nn.h"

namespace cucvae {

// Maps one "[CLS] a [SEP] b" pair to a fixed-size vector.
class ContextEncoder {
 public:
  virtual ~ContextEncoder() = default;
  virtual Vector encode(const std::string& pair_text) const = 0;
  virtual Index dim() const = 0;
};

// Frozen hashed bag-of-words: every whitespace token owns a seeded Gaussian
// vector and a pair is the mean of its tokens. The empty string maps to a
// dedicated constant vector.
class StubContextEncoder : public ContextEncoder {
 public:
  explicit StubContextEncoder(Index dim = 768, std::uint64_t seed = 0x5eedc0de);
  Vector encode(const std::string& pair_text) const override;
  Index dim() const override { return dim_; }

 private:
  Vector token_vector(const std::string& token) const;
  Index dim_;
  std::uint64_t seed_;
};

// Looks pair vectors up in a JSON-lines cache {pair_text_sha256, vector}
// produced by an external sentence encoder.
class CachedContextEncoder : public ContextEncoder {
 public:
  explicit CachedContextEncoder(const std::filesystem::path& cache);
  Vector encode(const std::string& pair_text) const override;
  Index dim() const override { return dim_; }

 private:
  std::unordered_map<std::string, Vector> vectors_;
  Index dim_ = 0;
};

std::string sha256_hex(const std::string& text);

// The 2l adjacent pairs over [u_{i-l} .. u_i .. u_{i+l}], left to right.
std::vector<std::string> build_pairs(const Utterance& utt);

// [pairs x encoder.dim()]
Matrix embed_pairs(const ContextEncoder& encoder,
                   const std::vector<std::string>& pairs);

struct CuHidden {
  ag::Var h;              // [T x d_model]
  ag::Var log_durations;  // [T x 1], predicts log(frames + 1)
};

class DurationPredictor {
 public:
  DurationPredictor() = default;
  DurationPredictor(nn::ParameterStore& store, const std::string& name,
                    Index d_model, Index kernel, nn::Rng& rng);
  ag::Var operator()(const ag::Var& h, const nn::ForwardContext& ctx) const;

  const nn::Conv1d& conv1() const { return conv1_; }
  const nn::Conv1d& conv2() const { return conv2_; }

 private:
  nn::Conv1d conv1_, conv2_;
  nn::LayerNorm norm1_, norm2_;
  nn::Linear out_;
};

class CuEmbedding {
 public:
  CuEmbedding() = default;
  // speakers: known speaker ids; row 0 of the speaker table is the
  // unknown-speaker row.
  CuEmbedding(nn::ParameterStore& store, const ModelConfig& config,
              const std::vector<std::string>& speakers, nn::Rng& rng);

  // Mixture encodings F [T x d_model].
  ag::Var encode_phonemes(const PhonemeTrack& track, const std::string& speaker,
                          const nn::ForwardContext& ctx) const;
  // G [T x d_model]; zeros when `pairs` has no rows.
  ag::Var fuse_context(const ag::Var& mixture, const Matrix& pairs,
                       std::vector<Matrix>* attention = nullptr) const;
  CuHidden project_hidden(const ag::Var& fused, const ag::Var& mixture,
                          const nn::ForwardContext& ctx) const;

  CuHidden forward(const PhonemeTrack& track, const std::string& speaker,
                   const Matrix& pair_embeddings,
                   const nn::ForwardContext& ctx) const;

  int speaker_index(const std::string& speaker) const;
  const std::vector<std::string>& speakers() const { return speakers_; }

  const ag::Var& speaker_table() const { return speaker_table_; }
  const ag::Var& projection() const { return projection_; }
  const nn::MultiHeadAttention& fusion() const { return fusion_; }
  const DurationPredictor& duration_predictor() const { return duration_; }

 private:
  ModelConfig config_;
  std::vector<std::string> speakers_;
  std::unordered_map<std::string, int> speaker_ids_;
  ag::Var phoneme_table_;
  ag::Var speaker_table_;
  std::vector<nn::FftBlock> encoder_;
  nn::MultiHeadAttention fusion_;
  ag::Var projection_;  // [2*d_model x d_model], no bias
  DurationPredictor duration_;
};

}  // namespace cucvae

#endif  // CUCVAE_CU_EMBEDDING_H_
