#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace emojivoice {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid UTF-8; offset is the byte index of the offending sequence.
class DecodeError : public Error {
 public:
  DecodeError(std::size_t offset, const std::string& what)
      : Error("invalid UTF-8 at byte " + std::to_string(offset) + ": " + what),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// A configuration document violates its schema. path is a dotted field path
// such as "styles[3].rate_sps".
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class UniquenessError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class StyleError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Not enough recordings for an emoji; emoji is its UTF-8 text.
class CountError : public Error {
 public:
  CountError(std::string emoji, const std::string& what)
      : Error(emoji + ": " + what), emoji_(std::move(emoji)) {}
  const std::string& emoji() const noexcept { return emoji_; }

 private:
  std::string emoji_;
};

class UnsupportedDesignError : public Error {
 public:
  using Error::Error;
};

class EmptyReplyError : public Error {
 public:
  using Error::Error;
};

}  // namespace emojivoice
