#ifndef CUCVAE_ERRORS_H_
#define CUCVAE_ERRORS_H_

#include <stdexcept>
#include <string>

namespace cucvae {

// Malformed input text; carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, long line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cucvae

#endif  // CUCVAE_ERRORS_H_
