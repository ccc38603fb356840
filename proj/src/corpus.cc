#include "cucvae/corpus.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cucvae {
namespace {

using nlohmann::json;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

std::string require_string(const json& obj, const char* key,
                           const std::string& source, long line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw ParseError(source, line, std::string("missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

int require_int(const json& obj, const char* key, const std::string& source,
                long line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_integer()) {
    throw ParseError(source, line, std::string("missing integer field '") + key + "'");
  }
  return it->get<int>();
}

double parse_seconds(const std::string& field, const std::string& source,
                     long line) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = first + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
    throw ParseError(source, line, "bad time value '" + field + "'");
  }
  return value;
}

}  // namespace

int PhonemeTrack::total_frames() const {
  return std::accumulate(durations.begin(), durations.end(), 0);
}

std::vector<int> PhonemeTrack::frame_offsets() const {
  std::vector<int> offsets(durations.size() + 1, 0);
  for (std::size_t i = 0; i < durations.size(); ++i) {
    offsets[i + 1] = offsets[i] + durations[i];
  }
  return offsets;
}

void PhonemeTrack::validate() const {
  if (durations.size() != phonemes.size()) {
    throw ValidationError("phoneme track: durations/phonemes length mismatch");
  }
  for (int d : durations) {
    if (d < 0) throw ValidationError("phoneme track: negative duration");
  }
  int expect = 0;
  for (const auto& span : word_spans) {
    if (span.start != expect || span.end <= span.start) {
      throw ValidationError("phoneme track: word spans must be contiguous and non-empty");
    }
    expect = span.end;
  }
  if (expect != size()) {
    throw ValidationError("phoneme track: word spans do not cover all phonemes");
  }
}

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw ValidationError("unknown split '" + s + "' (allowed: train, val, test)");
}

std::vector<const ManifestEntry*> DatasetManifest::in_split(Split split) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(&e);
  }
  return out;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_manifest(in, path.string());
}

DatasetManifest parse_manifest(std::istream& in, const std::string& source) {
  DatasetManifest manifest;
  std::set<std::string> ids;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(source, lineno, e.what());
    }
    if (!obj.is_object()) throw ParseError(source, lineno, "expected a JSON object");
    ManifestEntry entry;
    entry.id = require_string(obj, "id", source, lineno);
    entry.speaker = require_string(obj, "speaker", source, lineno);
    entry.text = require_string(obj, "text", source, lineno);
    entry.audio = require_string(obj, "audio", source, lineno);
    entry.alignment = require_string(obj, "alignment", source, lineno);
    try {
      entry.split = parse_split(require_string(obj, "split", source, lineno));
    } catch (const ValidationError& e) {
      throw ValidationError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (entry.text.empty()) {
      throw ValidationError(source + ":" + std::to_string(lineno) + ": empty text");
    }
    if (!ids.insert(entry.id).second) {
      throw ValidationError(source + ":" + std::to_string(lineno) +
                            ": duplicate id '" + entry.id + "'");
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& e : manifest.entries) {
    json obj = {{"id", e.id},       {"speaker", e.speaker},
                {"text", e.text},   {"audio", e.audio},
                {"alignment", e.alignment}, {"split", to_string(e.split)}};
    out << obj.dump() << '\n';
  }
}

std::filesystem::path resolve_relative(const std::filesystem::path& base_file,
                                       const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p;
  return base_file.parent_path() / p;
}

std::vector<Split> assign_splits(std::size_t count,
                                 std::array<double, 3> fractions,
                                 std::uint64_t seed) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (!(total > 0.0) || fractions[0] < 0 || fractions[1] < 0 || fractions[2] < 0) {
    throw ValidationError("split fractions must be non-negative and not all zero");
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(static_cast<double>(count) * fractions[0] / total));
  const auto n_val = static_cast<std::size_t>(
      std::llround(static_cast<double>(count) * fractions[1] / total));
  std::vector<Split> splits(count, Split::kTest);
  for (std::size_t rank = 0; rank < count; ++rank) {
    if (rank < n_train) {
      splits[order[rank]] = Split::kTrain;
    } else if (rank < n_train + n_val) {
      splits[order[rank]] = Split::kVal;
    }
  }
  return splits;
}

PhonemeTrack load_alignment(const std::filesystem::path& path,
                            double frames_per_second) {
  auto in = open_input(path);
  return parse_alignment(in, path.string(), frames_per_second);
}

PhonemeTrack parse_alignment(std::istream& in, const std::string& source,
                             double frames_per_second) {
  PhonemeTrack track;
  std::string line;
  long lineno = 0;
  double prev_start = 0.0;
  double prev_end = 0.0;
  int prev_word = -1;
  constexpr double kSlack = 1e-9;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 4) {
      throw ParseError(source, lineno, "expected 4 tab-separated fields");
    }
    const double start = parse_seconds(fields[1], source, lineno);
    const double end = parse_seconds(fields[2], source, lineno);
    int word = 0;
    {
      auto [ptr, ec] = std::from_chars(fields[3].data(),
                                       fields[3].data() + fields[3].size(), word);
      if (ec != std::errc{} || ptr != fields[3].data() + fields[3].size()) {
        throw ParseError(source, lineno, "bad word index '" + fields[3] + "'");
      }
    }
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    if (start < 0.0 || end < 0.0) throw ValidationError(where + "negative time");
    if (end < start) throw ValidationError(where + "interval ends before it starts");
    if (!track.phonemes.empty()) {
      if (start + kSlack < prev_start) throw ValidationError(where + "rows out of order");
      if (start + kSlack < prev_end) throw ValidationError(where + "overlapping intervals");
    }
    if (word < 0 || word < prev_word || word > prev_word + 1) {
      throw ValidationError(where + "word indices must start at 0 and increase by at most 1");
    }
    const long first = std::lround(start * frames_per_second);
    const long last = std::lround(end * frames_per_second);
    const int index = track.size();
    if (word != prev_word) {
      track.word_spans.push_back({index, index + 1});
    } else {
      track.word_spans.back().end = index + 1;
    }
    track.phonemes.push_back(fields[0]);
    track.durations.push_back(static_cast<int>(last - first));
    prev_start = start;
    prev_end = end;
    prev_word = word;
  }
  return track;
}

void save_alignment(const PhonemeTrack& track, double frames_per_second,
                    const std::filesystem::path& path) {
  track.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(9);
  const auto offsets = track.frame_offsets();
  for (int w = 0; w < track.word_count(); ++w) {
    for (int p = track.word_spans[w].start; p < track.word_spans[w].end; ++p) {
      out << track.phonemes[p] << '\t' << offsets[p] / frames_per_second << '\t'
          << offsets[p + 1] / frames_per_second << '\t' << w << '\n';
    }
  }
}

int reconcile_durations(PhonemeTrack& track, int mel_frames) {
  const int total = track.total_frames();
  const int diff = total - mel_frames;
  if (diff == 0) return mel_frames;
  if (diff > 1 || diff < -1) {
    throw ValidationError("alignment covers " + std::to_string(total) +
                          " frames but mel has " + std::to_string(mel_frames));
  }
  if (diff == 1) {
    if (track.durations.empty() || track.durations.back() == 0) {
      throw ValidationError("cannot clip a zero-length final phoneme");
    }
    --track.durations.back();
    return mel_frames;
  }
  return mel_frames - 1;
}

Utterance build_context_window(const std::vector<Utterance>& corpus,
                               std::size_t index, int l) {
  if (index >= corpus.size()) throw std::out_of_range("context window index");
  if (l < 0) throw std::invalid_argument("context window size must be >= 0");
  Utterance out = corpus[index];
  out.neighbors_before.clear();
  out.neighbors_after.clear();
  const auto i = static_cast<long>(index);
  const auto n = static_cast<long>(corpus.size());
  for (long k = i - l; k < i; ++k) {
    out.neighbors_before.push_back(k >= 0 ? corpus[k].text : std::string());
  }
  for (long k = i + 1; k <= i + l; ++k) {
    out.neighbors_after.push_back(k < n ? corpus[k].text : std::string());
  }
  return out;
}

std::string to_string(EditOp op) {
  switch (op) {
    case EditOp::kDelete: return "delete";
    case EditOp::kInsert: return "insert";
    case EditOp::kReplace: return "replace";
  }
  return "delete";
}

EditOp parse_edit_op(const std::string& s) {
  if (s == "delete") return EditOp::kDelete;
  if (s == "insert") return EditOp::kInsert;
  if (s == "replace") return EditOp::kReplace;
  throw ValidationError("unknown edit op '" + s + "' (allowed: delete, insert, replace)");
}

void EditScript::validate() const {
  if (target_words.start < 0 || target_words.end < target_words.start) {
    throw ValidationError("edit script: invalid word span");
  }
  switch (op) {
    case EditOp::kDelete:
      if (!replacement_text.empty())
        throw ValidationError("edit script: delete must not carry replacement text");
      if (target_words.size() == 0)
        throw ValidationError("edit script: delete needs a non-empty span");
      break;
    case EditOp::kInsert:
      if (target_words.size() != 0)
        throw ValidationError("edit script: insert needs a zero-width span");
      if (replacement_text.empty())
        throw ValidationError("edit script: insert needs replacement text");
      break;
    case EditOp::kReplace:
      if (target_words.size() == 0 || replacement_text.empty())
        throw ValidationError("edit script: replace needs a span and replacement text");
      break;
  }
}

std::vector<EditScript> load_edit_scripts(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_edit_scripts(in, path.string());
}

std::vector<EditScript> parse_edit_scripts(std::istream& in,
                                           const std::string& source) {
  std::vector<EditScript> scripts;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(source, lineno, e.what());
    }
    EditScript s;
    s.utterance_id = require_string(obj, "id", source, lineno);
    s.target_words.start = require_int(obj, "word_start", source, lineno);
    s.target_words.end = require_int(obj, "word_end", source, lineno);
    s.replacement_text = obj.value("text", std::string());
    try {
      s.op = parse_edit_op(require_string(obj, "op", source, lineno));
      s.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
    scripts.push_back(std::move(s));
  }
  return scripts;
}

}  // namespace cucvae
