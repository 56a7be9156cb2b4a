// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#pragma once

#include <stdexcept>
#include <string>

namespace ligdoctor {

// Error categories map one-to-one onto the CLI exit codes.
enum class ErrorKind {
  kInput = 2,
  kDivergence = 3,
  kVocabulary = 4,
  kGradCheck = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::kInput, what) {}
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what)
      : Error(ErrorKind::kDivergence, what) {}
};

class VocabularyError : public Error {
 public:
  explicit VocabularyError(const std::string& what)
      : Error(ErrorKind::kVocabulary, what) {}
};

}  // namespace ligdoctor
