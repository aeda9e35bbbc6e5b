#pragma once

#include "cbma/types.hpp"

#include <bit>
#include <cstring>
#include <string>
#include <vector>

namespace cbma {

// Little-endian byte buffers for checkpoints and chain arrays. Values are
// written byte-by-byte so files are identical across hosts.

class BinaryWriter {
 public:
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) bytes_.push_back(static_cast<char>((v >> (8 * b)) & 0xffU));
  }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) bytes_.push_back(static_cast<char>((v >> (8 * b)) & 0xffU));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s);
  }
  void matrix(const MatrixXd& m) {
    i64(m.rows());
    i64(m.cols());
    for (Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
  }
  void vector(const VectorXd& v) {
    i64(v.size());
    for (Index i = 0; i < v.size(); ++i) f64(v(i));
  }

  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    pos_ += 8;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    pos_ += 4;
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::string str() { return raw(static_cast<std::size_t>(u64())); }
  MatrixXd matrix() {
    const std::int64_t r = i64();
    const std::int64_t c = i64();
    if (r < 0 || c < 0) throw Error("corrupt_file", "negative matrix dimensions");
    need(static_cast<std::size_t>(r * c) * 8);
    MatrixXd m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
    return m;
  }
  VectorXd vector() {
    const std::int64_t n = i64();
    if (n < 0) throw Error("corrupt_file", "negative vector length");
    need(static_cast<std::size_t>(n) * 8);
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = f64();
    return v;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error("corrupt_file", "unexpected end of binary data");
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

/// Writes to path + ".tmp" and renames over path.
void atomic_write(const std::string& path, const std::vector<char>& bytes);
void atomic_write(const std::string& path, const std::string& text);
std::vector<char> read_file(const std::string& path);

}  // namespace cbma
