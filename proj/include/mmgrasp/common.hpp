#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mmgrasp {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ClassId = int;

constexpr ClassId kRestClass = 0;

// Exact equality that also tolerates differing shapes.
template <typename A, typename B>
bool same_matrix(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

// Exit-code mapping in the CLI: ValidationError/ParseError/DataError -> 1, IoError -> 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

// Converts a duration to a sample count on a `rate` Hz grid.
inline std::size_t window_samples(double seconds, double rate) {
  if (!(seconds > 0.0) || !(rate > 0.0)) {
    throw ValidationError("window duration and rate must be positive");
  }
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  return n == 0 ? 1 : n;
}

// Minimal logfmt-style logger writing to stderr.
class Log {
 public:
  enum class Level { debug, info, warn, error };

  static Level& threshold() {
    static Level level = Level::info;
    return level;
  }

  static void write(Level level, std::string_view stage, std::string_view message) {
    if (level < threshold()) return;
    static std::mutex mutex;
    std::lock_guard lock(mutex);
    std::cerr << "level=" << name(level) << " stage=" << stage << " msg=\"" << message << "\"\n";
  }

 private:
  static const char* name(Level level) {
    switch (level) {
      case Level::debug: return "debug";
      case Level::info: return "info";
      case Level::warn: return "warn";
      case Level::error: return "error";
    }
    return "info";
  }
};

inline void log_info(std::string_view stage, std::string_view msg) { Log::write(Log::Level::info, stage, msg); }
inline void log_warn(std::string_view stage, std::string_view msg) { Log::write(Log::Level::warn, stage, msg); }

}  // namespace mmgrasp
