#pragma once

// Small file helpers shared by the CSV readers and the binary containers.
// Binary containers are little-endian, fixed-width, no padding.

#include "mmgrasp/common.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace mmgrasp::io {

static_assert(std::endian::native == std::endian::little, "binary containers assume a little-endian host");

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string data;
  in.seekg(0, std::ios::end);
  data.resize(static_cast<std::size_t>(in.tellg()));
  in.seekg(0, std::ios::beg);
  in.read(data.data(), static_cast<std::streamsize>(data.size()));
  if (!in) throw IoError("failed reading " + path);
  return data;
}

inline void write_file(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("failed writing " + path);
}

// Line-oriented CSV cursor. Fields are comma separated, no quoting.
class CsvReader {
 public:
  CsvReader(std::string path, std::string data) : path_(std::move(path)), data_(std::move(data)) {}

  static CsvReader open(const std::string& path) { return CsvReader(path, read_file(path)); }

  // Returns false at end of input. Blank lines are skipped.
  bool next(std::vector<std::string_view>& fields) {
    while (pos_ < data_.size()) {
      std::size_t end = data_.find('\n', pos_);
      if (end == std::string::npos) end = data_.size();
      std::string_view line(data_.data() + pos_, end - pos_);
      pos_ = end + 1;
      ++line_;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.empty()) continue;
      fields.clear();
      std::size_t start = 0;
      for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
          fields.push_back(trim(line.substr(start)));
          break;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
      }
      return true;
    }
    return false;
  }

  std::size_t line() const { return line_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_, line_, what); }

  double number(std::string_view field, std::string_view column) const {
    double value = 0.0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) fail("column '" + std::string(column) + "': not a number: '" + std::string(field) + "'");
    if (!std::isfinite(value)) fail("column '" + std::string(column) + "': non-finite value '" + std::string(field) + "'");
    return value;
  }

  long long integer(std::string_view field, std::string_view column) const {
    long long value = 0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) fail("column '" + std::string(column) + "': not an integer: '" + std::string(field) + "'");
    return value;
  }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
  }

  std::string path_;
  std::string data_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

// Appends the shortest round-trip representation of a double.
inline void append_number(std::string& out, double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, ptr);
}

inline void append_number(std::string& out, long long value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, ptr);
}

class BinaryWriter {
 public:
  template <typename T>
  void put(const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&value);
    buffer_.append(p, sizeof(T));
  }

  template <typename T>
  void put_array(std::span<const T> values) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(values.data());
    buffer_.append(p, values.size_bytes());
  }

  void put_bytes(std::string_view bytes) { buffer_.append(bytes); }

  const std::string& data() const { return buffer_; }

 private:
  std::string buffer_;
};

class BinaryReader {
 public:
  BinaryReader(std::string path, std::string data) : path_(std::move(path)), data_(std::move(data)) {}

  static BinaryReader open(const std::string& path) { return BinaryReader(path, read_file(path)); }

  template <typename T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    require(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  template <typename T>
  void get_array(std::span<T> out) {
    static_assert(std::is_trivially_copyable_v<T>);
    require(out.size_bytes());
    std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
    pos_ += out.size_bytes();
  }

  void expect_magic(std::string_view magic) {
    require(magic.size());
    if (std::string_view(data_.data() + pos_, magic.size()) != magic) {
      throw DataError(path_ + ": bad magic, expected '" + std::string(magic) + "'");
    }
    pos_ += magic.size();
  }

  bool at_end() const { return pos_ == data_.size(); }
  const std::string& path() const { return path_; }

 private:
  void require(std::size_t n) const {
    if (data_.size() - pos_ < n) throw DataError(path_ + ": truncated container");
  }

  std::string path_;
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace mmgrasp::io
