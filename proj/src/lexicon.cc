#include "cucvae/lexicon.h"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace cucvae {
namespace {

// word followed by its pronunciation, one entry per line.
constexpr const char* kBuiltinLexicon = R"(a AH
about AH B AW T
after AE F T ER
again AH G EH N
all AO L
an AE N
and AE N D
answer AE N S ER
are AA R
as AE Z
asked AE S K T
at AE T
back B AE K
be B IY
because B IH K AH Z
been B IH N
before B IH F AO R
bird B ER D
black B L AE K
blue B L UW
book B UH K
boy B OY
bright B R AY T
but B AH T
by B AY
called K AO L D
came K EY M
can K AE N
child CH AY L D
city S IH T IY
cold K OW L D
could K UH D
day D EY
did D IH D
do D UW
door D AO R
down D AW N
early ER L IY
evening IY V N IH NG
every EH V R IY
eyes AY Z
face F EY S
far F AA R
father F AA DH ER
few F Y UW
find F AY N D
fire F AY ER
first F ER S T
five F AY V
for F AO R
found F AW N D
four F AO R
friend F R EH N D
from F R AH M
garden G AA R D AH N
gave G EY V
girl G ER L
give G IH V
go G OW
gold G OW L D
good G UH D
great G R EY T
green G R IY N
had HH AE D
hand HH AE N D
happy HH AE P IY
has HH AE Z
have HH AE V
he HH IY
heard HH ER D
her HH ER
here HH IY R
him HH IH M
his HH IH Z
home HH OW M
house HH AW S
how HH AW
i AY
if IH F
in IH N
into IH N T UW
is IH Z
it IH T
just JH AH S T
king K IH NG
knew N UW
know N OW
last L AE S T
late L EY T
light L AY T
like L AY K
little L IH T AH L
long L AO NG
looked L UH K T
made M EY D
man M AE N
mary M EH R IY
me M IY
more M AO R
morning M AO R N IH NG
mother M AH DH ER
much M AH CH
my M AY
never N EH V ER
new N UW
night N AY T
no N OW
not N AA T
now N AW
of AH V
old OW L D
on AA N
once W AH N
one W AH N
only OW N L IY
open OW P AH N
or AO R
other AH DH ER
our AW ER
out AW T
over OW V ER
people P IY P AH L
place P L EY S
quiet K W AY AH T
red R EH D
river R IH V ER
road R OW D
room R UW M
said S EH D
saw S AO
sea S IY
see S IY
she SH IY
should SH UH D
side S AY D
small S M AO L
so S OW
some S AH M
soon S UW N
still S T IH L
stood S T UH D
street S T R IY T
sun S AH N
table T EY B AH L
take T EY K
than DH AE N
that DH AE T
the DH AH
their DH EH R
them DH EH M
then DH EH N
there DH EH R
they DH EY
thing TH IH NG
think TH IH NG K
this DH IH S
three TH R IY
through TH R UW
time T AY M
to T UW
told T OW L D
too T UW
took T UH K
tree T R IY
two T UW
under AH N D ER
up AH P
upon AH P AA N
very V EH R IY
voice V OY S
walked W AO K T
was W AA Z
water W AO T ER
way W EY
we W IY
well W EH L
went W EH N T
were W ER
what W AH T
when W EH N
where W EH R
which W IH CH
white W AY T
who HH UW
why W AY
will W IH L
window W IH N D OW
with W IH DH
woman W UH M AH N
word W ER D
world W ER L D
would W UH D
year Y IH R
yes Y EH S
you Y UW
young Y AH NG
your Y AO R
)";

// Letter passthrough used for out-of-vocabulary words.
const std::unordered_map<char, std::vector<std::string>>& letter_sounds() {
  static const std::unordered_map<char, std::vector<std::string>> table = {
      {'a', {"AE"}}, {'b', {"B"}},  {'c', {"K"}},  {'d', {"D"}},
      {'e', {"EH"}}, {'f', {"F"}},  {'g', {"G"}},  {'h', {"HH"}},
      {'i', {"IH"}}, {'j', {"JH"}}, {'k', {"K"}},  {'l', {"L"}},
      {'m', {"M"}},  {'n', {"N"}},  {'o', {"AA"}}, {'p', {"P"}},
      {'q', {"K"}},  {'r', {"R"}},  {'s', {"S"}},  {'t', {"T"}},
      {'u', {"AH"}}, {'v', {"V"}},  {'w', {"W"}},  {'x', {"K", "S"}},
      {'y', {"Y"}},  {'z', {"Z"}},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& phoneme_inventory() {
  static const std::vector<std::string> inventory = {
      "<unk>", "sil", "AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH", "D",
      "DH",    "EH",  "ER", "EY", "F",  "G",  "HH", "IH", "IY", "JH", "K",
      "L",     "M",   "N",  "NG", "OW", "OY", "P",  "R",  "S",  "SH", "T",
      "TH",    "UH",  "UW", "V",  "W",  "Y",  "Z",  "ZH"};
  return inventory;
}

int phoneme_id(const std::string& symbol) {
  static const std::unordered_map<std::string, int> ids = [] {
    std::unordered_map<std::string, int> m;
    const auto& inv = phoneme_inventory();
    for (std::size_t i = 0; i < inv.size(); ++i) m[inv[i]] = static_cast<int>(i);
    return m;
  }();
  std::string base = symbol;
  while (!base.empty() && std::isdigit(static_cast<unsigned char>(base.back()))) {
    base.pop_back();  // drop ARPAbet stress markers
  }
  auto it = ids.find(base);
  return it == ids.end() ? kUnknownPhonemeId : it->second;
}

bool G2pResult::all_oov() const {
  return std::all_of(oov.begin(), oov.end(), [](bool b) { return b; });
}

const Lexicon& Lexicon::builtin() {
  static const Lexicon lexicon = [] {
    Lexicon lex;
    std::istringstream in(kBuiltinLexicon);
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream fields(line);
      std::string word, ph;
      if (!(fields >> word)) continue;
      std::vector<std::string> phones;
      while (fields >> ph) phones.push_back(ph);
      lex.add(word, std::move(phones));
    }
    return lex;
  }();
  return lexicon;
}

void Lexicon::add(const std::string& word, std::vector<std::string> phonemes) {
  entries_[word] = std::move(phonemes);
}

bool Lexicon::contains(const std::string& word) const {
  return entries_.count(word) != 0;
}

std::vector<std::string> Lexicon::normalize_words(const std::string& text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (unsigned char c : text) {
    if (std::isalpha(c) || c == '\'') {
      cleaned.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c) || c == '-') {
      cleaned.push_back(' ');
    }
  }
  std::vector<std::string> words;
  std::istringstream in(cleaned);
  std::string w;
  while (in >> w) {
    w.erase(std::remove(w.begin(), w.end(), '\''), w.end());
    if (!w.empty()) words.push_back(w);
  }
  return words;
}

G2pResult Lexicon::convert(const std::string& text) const {
  G2pResult result;
  result.words = normalize_words(text);
  for (const auto& word : result.words) {
    const int start = result.track.size();
    auto it = entries_.find(word);
    if (it != entries_.end()) {
      result.oov.push_back(false);
      for (const auto& p : it->second) result.track.phonemes.push_back(p);
    } else {
      result.oov.push_back(true);
      for (char c : word) {
        auto sound = letter_sounds().find(c);
        if (sound == letter_sounds().end()) continue;
        for (const auto& p : sound->second) result.track.phonemes.push_back(p);
      }
    }
    result.track.word_spans.push_back({start, result.track.size()});
  }
  result.track.durations.assign(result.track.phonemes.size(), 0);
  return result;
}

}  // namespace cucvae
