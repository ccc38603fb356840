// Static grapheme-to-phoneme lookup with a letter passthrough for
// out-of-vocabulary words.
#ifndef CUCVAE_LEXICON_H_
#define CUCVAE_LEXICON_H_

#include <string>
#include <unordered_map>
#include <vector>

#include "cucvae/corpus.h"

namespace cucvae {

// ARPAbet symbols without stress, plus "sil". Index 0 is reserved for the
// unknown-phoneme row.
const std::vector<std::string>& phoneme_inventory();
constexpr int kUnknownPhonemeId = 0;
int phoneme_id(const std::string& symbol);

struct G2pResult {
  PhonemeTrack track;  // durations all zero
  std::vector<std::string> words;
  std::vector<bool> oov;  // per word
  bool all_oov() const;
};

class Lexicon {
 public:
  // The bundled English word list.
  static const Lexicon& builtin();

  Lexicon() = default;
  void add(const std::string& word, std::vector<std::string> phonemes);
  bool contains(const std::string& word) const;

  // Lowercases, drops digits, punctuation and apostrophes, splits on
  // whitespace. OOV words are spelled letter by letter.
  G2pResult convert(const std::string& text) const;

  static std::vector<std::string> normalize_words(const std::string& text);

 private:
  std::unordered_map<std::string, std::vector<std::string>> entries_;
};

}  // namespace cucvae

#endif  // CUCVAE_LEXICON_H_
