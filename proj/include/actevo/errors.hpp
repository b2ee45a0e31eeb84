#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace actevo {

// Malformed expression text. `position` is a 0-based byte offset into the
// input; `expected` describes the token class the parser wanted there.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string message, std::size_t position, std::string expected)
      : std::runtime_error(std::move(message)),
        position(position),
        expected(std::move(expected)) {}

  std::size_t position;
  std::string expected;
};

// Text parsed, but the tree is not a balanced core-unit tree.
class StructureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DepthMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed binary dataset file. Carries the byte offset of the problem.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::string message, std::size_t byte_offset)
      : std::runtime_error(std::move(message)), byte_offset(byte_offset) {}

  std::size_t byte_offset;
};

// A gradient-check point sits too close to a non-smooth locus.
class BadPoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SpaceTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyPopulation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ResumeMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace actevo
