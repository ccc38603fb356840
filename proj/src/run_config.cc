#include "cucvae/run_config.h"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cucvae/cu_embedding.h"
#include "cucvae/errors.h"

namespace cucvae {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ValidationError("config: bad value '" + v + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("config: bad boolean '" + v + "' for " + key);
}

std::string fmt(double x) {
  std::ostringstream out;
  out.precision(17);
  out << x;
  return out.str();
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define CUCVAE_NUM(key, T, expr)                                                  \
  {key, {[](RunConfig& c, const std::string& v) { c.expr = parse_number<T>(key, v); }, \
         [](const RunConfig& c) { return std::to_string(c.expr); }}}
#define CUCVAE_REAL(key, expr)                                                        \
  {key, {[](RunConfig& c, const std::string& v) { c.expr = parse_number<double>(key, v); }, \
         [](const RunConfig& c) { return fmt(c.expr); }}}
#define CUCVAE_STR(key, expr)                                          \
  {key, {[](RunConfig& c, const std::string& v) { c.expr = v; }, \
         [](const RunConfig& c) { return c.expr; }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      CUCVAE_NUM("audio.sample_rate", int, audio.sample_rate),
      CUCVAE_NUM("audio.fft_size", int, audio.fft_size),
      CUCVAE_NUM("audio.hop_length", int, audio.hop_length),
      CUCVAE_NUM("audio.win_length", int, audio.win_length),
      CUCVAE_NUM("audio.n_mels", int, audio.n_mels),
      CUCVAE_REAL("audio.fmin_hz", audio.fmin_hz),
      CUCVAE_REAL("audio.fmax_hz", audio.fmax_hz),
      CUCVAE_NUM("model.d_model", Index, model.d_model),
      CUCVAE_NUM("model.n_enc_layers", Index, model.n_enc_layers),
      CUCVAE_NUM("model.n_dec_blocks", Index, model.n_dec_blocks),
      CUCVAE_NUM("model.n_heads", Index, model.n_heads),
      CUCVAE_NUM("model.fusion_heads", Index, model.fusion_heads),
      CUCVAE_NUM("model.latent_dim", Index, model.latent_dim),
      CUCVAE_NUM("model.context_l", int, model.context_l),
      CUCVAE_NUM("model.d_ctx", Index, model.d_ctx),
      CUCVAE_NUM("model.ffn_dim", Index, model.ffn_dim),
      CUCVAE_NUM("model.conv_kernel", Index, model.conv_kernel),
      CUCVAE_NUM("model.duration_kernel", Index, model.duration_kernel),
      CUCVAE_NUM("model.smoothing_kernel", Index, model.smoothing_kernel),
      CUCVAE_REAL("model.dropout", model.dropout),
      {"model.prior",
       {[](RunConfig& c, const std::string& v) {
          if (v == "context") c.model.prior = PriorKind::kContext;
          else if (v == "standard") c.model.prior = PriorKind::kStandard;
          else throw ValidationError("config: model.prior must be context or standard");
        },
        [](const RunConfig& c) {
          return std::string(c.model.prior == PriorKind::kContext ? "context" : "standard");
        }}},
      CUCVAE_REAL("train.beta1", train.beta1),
      CUCVAE_REAL("train.beta2", train.beta2),
      CUCVAE_REAL("train.kl_warmup_frac", train.kl_warmup_frac),
      CUCVAE_REAL("train.lambda_mask", train.lambda_mask),
      CUCVAE_REAL("train.mask_rate", train.mask_rate),
      {"train.unbiased",
       {[](RunConfig& c, const std::string& v) { c.train.unbiased = parse_bool("train.unbiased", v); },
        [](const RunConfig& c) { return std::string(c.train.unbiased ? "true" : "false"); }}},
      CUCVAE_REAL("train.lr", train.lr),
      CUCVAE_NUM("train.steps", long, train.steps),
      CUCVAE_NUM("train.batch_size", int, train.batch_size),
      CUCVAE_NUM("train.checkpoint_every", long, train.checkpoint_every),
      CUCVAE_NUM("train.seed_init", std::uint64_t, train.seed_init),
      CUCVAE_NUM("train.seed_noise", std::uint64_t, train.seed_noise),
      CUCVAE_NUM("train.seed_dropout", std::uint64_t, train.seed_dropout),
      CUCVAE_NUM("train.seed_order", std::uint64_t, train.seed_order),
      CUCVAE_STR("paths.manifest", paths.manifest),
      CUCVAE_STR("paths.run_dir", paths.run_dir),
      CUCVAE_STR("paths.checkpoint_dir", paths.checkpoint_dir),
      CUCVAE_STR("paths.embedding_cache", paths.embedding_cache),
  };
  return table;
}

#undef CUCVAE_NUM
#undef CUCVAE_REAL
#undef CUCVAE_STR

const Field& field(const std::string& key) {
  for (const auto& [k, f] : fields()) {
    if (k == key) return f;
  }
  throw ValidationError("config: unknown key '" + key + "'");
}

}  // namespace

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, f] : fields()) out.push_back(k);
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  field(trim(key)).set(*this, trim(value));
}

void RunConfig::apply_overrides(const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ValidationError("override '" + a + "' is not key=value");
    set(a.substr(0, eq), a.substr(eq + 1));
  }
}

RunConfig RunConfig::parse(const std::string& text, const std::string& source) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, lineno, "expected key = value");
    try {
      c.set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const ValidationError& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(*this) + "\n";
  return out;
}

void RunConfig::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_text();
}

void RunConfig::validate() const {
  audio.validate();
  model.validate();
  if (!(train.mask_rate > 0.0 && train.mask_rate < 1.0)) {
    throw ValidationError("train.mask_rate must lie in (0, 1)");
  }
  if (train.lambda_mask < 0.0) throw ValidationError("train.lambda_mask must be >= 0");
  if (train.beta1 < 0.0 || train.beta2 < 0.0) throw ValidationError("train.beta1/beta2 must be >= 0");
  if (train.kl_warmup_frac < 0.0 || train.kl_warmup_frac > 1.0) {
    throw ValidationError("train.kl_warmup_frac must lie in [0, 1]");
  }
  if (!(train.lr > 0.0)) throw ValidationError("train.lr must be positive");
  if (train.steps < 0) throw ValidationError("train.steps must be >= 0");
  if (train.batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
  if (train.checkpoint_every < 1) throw ValidationError("train.checkpoint_every must be >= 1");
  if (paths.run_dir.empty()) throw ValidationError("paths.run_dir must be set");
}

std::string RunConfig::fingerprint() const { return sha256_hex(to_text()); }

std::filesystem::path RunConfig::checkpoint_dir() const {
  return paths.checkpoint_dir.empty() ? run_dir() / "checkpoints"
                                      : std::filesystem::path(paths.checkpoint_dir);
}

}  // namespace cucvae
