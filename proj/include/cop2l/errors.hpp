#pragma once

#include <stdexcept>
#include <string>

namespace cop2l {

// Configuration problems (bad keys, malformed values, missing files named by
// the config). The CLI maps these to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem / serialization failures. Exit code 1.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// IDX ingestion failures, one type per failure mode.
class IdxMagicError : public std::runtime_error {
 public:
  explicit IdxMagicError(const std::string& what) : std::runtime_error(what) {}
};

class IdxCountError : public std::runtime_error {
 public:
  explicit IdxCountError(const std::string& what) : std::runtime_error(what) {}
};

class IdxTruncatedError : public std::runtime_error {
 public:
  explicit IdxTruncatedError(const std::string& what) : std::runtime_error(what) {}
};

class CsvFormatError : public std::runtime_error {
 public:
  explicit CsvFormatError(const std::string& what) : std::runtime_error(what) {}
};

// A record that cannot belong to the given config (hash/hyperparameter
// mismatch). Distinct from a replay that runs but diverges.
class RecordIncompatibleError : public std::runtime_error {
 public:
  explicit RecordIncompatibleError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cop2l
