// Copyright 2026 The Glyforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace glyforge {

// Base class for every exception thrown by this library. Catching it at a
// process boundary is enough to map failures onto exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

// Lexer or parser failure. Carries the byte offset of the offending
// character when one can be pointed at, npos otherwise.
class ParseError : public Error {
 public:
  enum class Kind {
    unexpected_character,
    unterminated_linkage,
    unbalanced_brackets,
    dangling_linkage,
    unexpected_token,
    empty_input,
  };

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  ParseError(Kind kind, const std::string& message, std::size_t position = npos)
      : Error(position == npos ? message
                               : message + " at position " + std::to_string(position)),
        kind_(kind),
        position_(position) {}

  Kind kind() const { return kind_; }
  std::size_t position() const { return position_; }

 private:
  Kind kind_;
  std::size_t position_;
};

// Lookup of a name or id that a vocabulary does not contain.
class VocabError : public Error {
 public:
  using Error::Error;
};

// Tensor operands whose shapes do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// An index or id outside the range a container or operation accepts.
class IndexError : public Error {
 public:
  using Error::Error;
};

// Dataset level problems: empty corpora, degenerate labels, malformed rows.
class DataError : public Error {
 public:
  using Error::Error;
};

// File system and serialization failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// Invalid run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non finite values or a failed numerical verification.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Misuse of the reverse mode tape, such as replaying a consumed graph.
class TapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace glyforge
