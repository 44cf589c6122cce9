#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsnet {

/// Base of every error raised by the library. Callers that do not care about
/// the exact failure can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeMismatch : public Error {
 public:
  ShapeMismatch(std::string what_arg, int level = -1)
      : Error(std::move(what_arg)), level_(level) {}
  /// Pyramid level the mismatch was found at (1-based), or -1 when not tied to a level.
  int level() const noexcept { return level_; }

 private:
  int level_;
};

class MissingLevel : public Error {
 public:
  using Error::Error;
};

class WrongLevelCount : public Error {
 public:
  using Error::Error;
};

class SpatialTooLarge : public Error {
 public:
  using Error::Error;
};

class InputTooSmall : public Error {
 public:
  using Error::Error;
};

class UnknownEncoder : public Error {
 public:
  explicit UnknownEncoder(const std::string& name)
      : Error("unknown encoder '" + name + "'"), name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class EmptyLabeledBatch : public Error {
 public:
  using Error::Error;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

class EmptyGroundTruth : public Error {
 public:
  using Error::Error;
};

class NoValidPixels : public Error {
 public:
  using Error::Error;
};

class MissingCheckpoint : public Error {
 public:
  using Error::Error;
};

class MissingSubdir : public Error {
 public:
  using Error::Error;
};

class UnsupportedBitDepth : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class UnreadableImage : public Error {
 public:
  explicit UnreadableImage(std::string path)
      : Error("unreadable image: " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Stems present on one side of a directory pairing but not the other.
class StemMismatch : public Error {
 public:
  explicit StemMismatch(std::vector<std::string> stems);
  const std::vector<std::string>& stems() const noexcept { return stems_; }

 private:
  std::vector<std::string> stems_;
};

}  // namespace dsnet
