#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace matgi {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. line() is 1-based; 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class GrammarError : public Error {
 public:
  using Error::Error;
};

// Raised when a curriculum stage cannot parse any sentence of the corpus.
class StageAbort : public Error {
 public:
  StageAbort(std::string stage, const std::string& what)
      : Error("stage '" + stage + "': " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace matgi

namespace matgi {

// No sentence of a corpus could be parsed by the grammar being estimated.
class NoParsableSentences : public Error {
 public:
  using Error::Error;
};

}  // namespace matgi
