#include "cucvae/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>

#include "cucvae/errors.h"
#include "json.hpp"

namespace cucvae {
namespace {

constexpr char kMagic[8] = {'C', 'U', 'C', 'V', 'A', 'E', 'C', 'K'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void write_matrix(std::ostream& out, const Matrix& m) {
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

void read_matrix(std::istream& in, Matrix& m, const std::string& source) {
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) throw std::runtime_error(source + ": truncated checkpoint");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config,
                     const CucVaeModel& model, const nn::Adam& optimizer, long step) {
  using nlohmann::json;
  json header;
  header["format"] = 1;
  header["step"] = step;
  header["config"] = config.to_text();
  header["config_fingerprint"] = config.fingerprint();
  header["speakers"] = model.speakers();
  header["adam_steps"] = optimizer.steps();
  json params = json::array();
  for (const auto& [name, v] : model.store().entries()) {
    params.push_back({{"name", name}, {"rows", v.rows()}, {"cols", v.cols()}});
  }
  header["params"] = params;
  const bool moments = optimizer.first_moments().size() == model.store().entries().size();
  header["has_moments"] = moments;
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, v] : model.store().entries()) write_matrix(out, v.value());
    if (moments) {
      for (const auto& m : optimizer.first_moments()) write_matrix(out, m);
      for (const auto& m : optimizer.second_moments()) write_matrix(out, m);
    }
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  using nlohmann::json;
  const std::string source = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + source);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw ValidationError(source + ": not a checkpoint");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1u << 26)) throw ValidationError(source + ": bad checkpoint header");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ValidationError(source + ": truncated checkpoint header");
  const json header = json::parse(text);

  Checkpoint ck;
  ck.config = RunConfig::parse(header.at("config").get<std::string>(), source);
  ck.speakers = header.at("speakers").get<std::vector<std::string>>();
  ck.step = header.at("step").get<long>();
  ck.model = std::make_unique<CucVaeModel>(ck.config.model, ck.speakers, ck.config.train.seed_init);
  const auto& entries = ck.model->store().entries();
  const auto& params = header.at("params");
  if (params.size() != entries.size()) {
    throw ValidationError(source + ": parameter count does not match the configured model");
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& [name, v] = entries[i];
    if (params[i].at("name") != name || params[i].at("rows").get<Index>() != v.rows() ||
        params[i].at("cols").get<Index>() != v.cols()) {
      throw ValidationError(source + ": parameter " + name + " does not match the configured model");
    }
    ag::Var p = v;
    read_matrix(in, p.mutable_value(), source);
  }
  ck.optimizer = nn::Adam({ck.config.train.lr});
  if (header.at("has_moments").get<bool>()) {
    ck.optimizer.ensure_state(ck.model->store());
    for (auto& m : ck.optimizer.first_moments()) read_matrix(in, m, source);
    for (auto& m : ck.optimizer.second_moments()) read_matrix(in, m, source);
  }
  ck.optimizer.set_steps(header.at("adam_steps").get<std::int64_t>());
  return ck;
}

}  // namespace cucvae
