// Typed records for manifests, alignments, context windows and edit scripts.
#ifndef CUCVAE_CORPUS_H_
#define CUCVAE_CORPUS_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cucvae/errors.h"

namespace cucvae {

struct Utterance {
  std::string id;
  std::string speaker_id;
  std::string text;
  std::vector<std::string> neighbors_before;  // nearest last
  std::vector<std::string> neighbors_after;   // nearest first

  bool operator==(const Utterance&) const = default;
};

// Half-open phoneme index range [start, end) belonging to one word.
struct WordSpan {
  int start = 0;
  int end = 0;
  int size() const { return end - start; }
  bool operator==(const WordSpan&) const = default;
};

struct PhonemeTrack {
  std::vector<std::string> phonemes;
  std::vector<int> durations;  // frames per phoneme
  std::vector<WordSpan> word_spans;

  int size() const { return static_cast<int>(phonemes.size()); }
  int total_frames() const;
  // Frame offset of each phoneme's first frame, plus a final end offset.
  std::vector<int> frame_offsets() const;
  int word_count() const { return static_cast<int>(word_spans.size()); }
  // Throws ValidationError unless durations/word spans are consistent.
  void validate() const;

  bool operator==(const PhonemeTrack&) const = default;
};

enum class Split { kTrain, kVal, kTest };

std::string to_string(Split split);
Split parse_split(const std::string& s);

struct ManifestEntry {
  std::string id;
  std::string speaker;
  std::string text;
  std::string audio;
  std::string alignment;
  Split split = Split::kTrain;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry*> in_split(Split split) const;
  bool operator==(const DatasetManifest&) const = default;
};

// Reads JSON-lines {id, speaker, text, audio, alignment, split}. Relative
// audio/alignment paths are kept as written; resolve them against the
// manifest directory with resolve_relative().
DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(std::istream& in, const std::string& source);
void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);
std::filesystem::path resolve_relative(const std::filesystem::path& base_file,
                                       const std::string& path);

// Deterministic split assignment: a seeded shuffle cut at the cumulative
// fractions (train, val, test).
std::vector<Split> assign_splits(std::size_t count,
                                 std::array<double, 3> fractions = {0.90, 0.05,
                                                                    0.05},
                                 std::uint64_t seed = 0);

// Alignment TSV rows: phoneme, start_sec, end_sec, word_index.
PhonemeTrack load_alignment(const std::filesystem::path& path,
                            double frames_per_second);
PhonemeTrack parse_alignment(std::istream& in, const std::string& source,
                             double frames_per_second);
void save_alignment(const PhonemeTrack& track, double frames_per_second,
                    const std::filesystem::path& path);

// Makes sum(durations) agree with a mel of `mel_frames` frames. A one-frame
// surplus is taken off the final phoneme; a one-frame deficit is reported as
// a trailing mel frame to drop. Returns the number of mel frames to keep.
// Larger mismatches throw ValidationError.
int reconcile_durations(PhonemeTrack& track, int mel_frames);

// Neighbor window of size l around corpus[index], padded with "" at the
// corpus edges.
Utterance build_context_window(const std::vector<Utterance>& corpus,
                               std::size_t index, int l);

enum class EditOp { kDelete, kInsert, kReplace };

std::string to_string(EditOp op);
EditOp parse_edit_op(const std::string& s);

struct EditScript {
  std::string utterance_id;
  EditOp op = EditOp::kDelete;
  WordSpan target_words;  // word indices, half-open
  std::string replacement_text;

  void validate() const;
  bool operator==(const EditScript&) const = default;
};

// JSON-lines {id, op, word_start, word_end, text}.
std::vector<EditScript> load_edit_scripts(const std::filesystem::path& path);
std::vector<EditScript> parse_edit_scripts(std::istream& in,
                                           const std::string& source);

}  // namespace cucvae

#endif  // CUCVAE_CORPUS_H_
