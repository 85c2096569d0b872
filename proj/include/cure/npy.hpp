#pragma once

// NPY v1.0 container for little-endian float32/float64 tensors of rank 1 or 2.
// The writer reproduces the header layout numpy emits (sorted keys, growth
// padding, 64-byte alignment) so files survive a read/write round trip
// byte-for-byte.

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cure/spectra.hpp"

namespace cure::npy {

enum class Dtype { f4, f8 };

constexpr std::string_view descr(Dtype dtype) noexcept { return dtype == Dtype::f4 ? "<f4" : "<f8"; }
constexpr std::size_t item_size(Dtype dtype) noexcept { return dtype == Dtype::f4 ? 4 : 8; }

inline Dtype parse_dtype(std::string_view text) {
  if (text == "<f4") return Dtype::f4;
  if (text == "<f8") return Dtype::f8;
  fail(ErrorKind::UnsupportedDtype, "dtype '" + std::string(text) + "' (only '<f4' and '<f8' are supported)");
}

/// Rank-1 tensors are held as an n x 1 column.
struct Tensor {
  std::vector<std::size_t> shape;
  Dtype dtype = Dtype::f8;
  Matrix data;
};

inline constexpr char kMagic[] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};
inline constexpr std::size_t kPreambleSize = 10;  // magic + version + uint16 header length
inline constexpr std::size_t kAlign = 64;
inline constexpr std::size_t kGrowthDigits = 21;

namespace detail {

struct HeaderFields {
  std::optional<std::string> descr;
  std::optional<bool> fortran_order;
  std::optional<std::vector<std::size_t>> shape;
};

/// Minimal reader for the Python dict literal numpy writes.
class HeaderParser {
 public:
  explicit HeaderParser(std::string_view text) : s_(text) {}

  HeaderFields parse() {
    HeaderFields fields;
    expect('{');
    while (true) {
      skip_ws();
      if (peek() == '}') {
        ++pos_;
        break;
      }
      const std::string key = string_literal();
      skip_ws();
      expect(':');
      skip_ws();
      if (key == "descr") {
        fields.descr = string_literal();
      } else if (key == "fortran_order") {
        fields.fortran_order = boolean();
      } else if (key == "shape") {
        fields.shape = tuple();
      } else {
        malformed("unexpected key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != '}') {
        malformed("expected ',' or '}'");
      }
    }
    skip_ws();
    if (pos_ != s_.size()) malformed("trailing characters after dictionary");
    return fields;
  }

 private:
  [[noreturn]] void malformed(const std::string& what) const {
    fail(ErrorKind::BadMagic, "malformed NPY header at offset " + std::to_string(pos_) + ": " + what);
  }

  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  void expect(char c) {
    if (peek() != c) malformed(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string string_literal() {
    const char quote = peek();
    if (quote != '\'' && quote != '"') malformed("expected string literal");
    const auto end = s_.find(quote, pos_ + 1);
    if (end == std::string_view::npos) malformed("unterminated string literal");
    std::string out(s_.substr(pos_ + 1, end - pos_ - 1));
    pos_ = end + 1;
    return out;
  }

  bool boolean() {
    if (s_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (s_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    malformed("expected True or False");
  }

  std::vector<std::size_t> tuple() {
    expect('(');
    std::vector<std::size_t> dims;
    while (true) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        return dims;
      }
      if (!std::isdigit(static_cast<unsigned char>(peek()))) malformed("expected dimension");
      std::size_t value = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) value = value * 10 + static_cast<std::size_t>(s_[pos_++] - '0');
      dims.push_back(value);
      skip_ws();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ')') {
        malformed("expected ',' or ')'");
      }
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

template <class Word>
Word to_little(Word w) {
  if constexpr (std::endian::native == std::endian::big) {
    Word r = 0;
    for (std::size_t i = 0; i < sizeof(Word); ++i) r = static_cast<Word>((r << 8) | ((w >> (8 * i)) & 0xff));
    return r;
  }
  return w;
}

inline std::string shape_repr(const std::vector<std::size_t>& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  if (shape.size() == 1) out += ",";
  return out + ")";
}

}  // namespace detail

/// Decodes a complete NPY file image.
inline Tensor decode(std::string_view bytes) {
  if (bytes.size() < kPreambleSize || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorKind::BadMagic, "missing \\x93NUMPY magic string");
  }
  if (bytes[6] != '\x01' || bytes[7] != '\x00') {
    fail(ErrorKind::BadMagic, "unsupported NPY version " + std::to_string(static_cast<unsigned char>(bytes[6])) + "." +
                                  std::to_string(static_cast<unsigned char>(bytes[7])) + " (only 1.0)");
  }
  const std::size_t header_len =
      static_cast<unsigned char>(bytes[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  const std::size_t data_offset = kPreambleSize + header_len;
  if (bytes.size() < data_offset) fail(ErrorKind::TruncatedPayload, "file ends inside the header");
  const std::string_view header = bytes.substr(kPreambleSize, header_len);
  if (header.empty() || header.back() != '\n') fail(ErrorKind::BadMagic, "header is not newline-terminated");

  const auto fields = detail::HeaderParser(header).parse();
  if (!fields.descr || !fields.fortran_order || !fields.shape) {
    fail(ErrorKind::BadMagic, "header must define descr, fortran_order and shape");
  }
  const Dtype dtype = parse_dtype(*fields.descr);
  if (*fields.fortran_order) fail(ErrorKind::UnsupportedLayout, "fortran_order arrays are not supported");
  const auto& shape = *fields.shape;
  if (shape.empty() || shape.size() > 2) {
    fail(ErrorKind::UnsupportedLayout, "tensor rank " + std::to_string(shape.size()) + " (only 1 or 2)");
  }

  const std::size_t count = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  const std::size_t expected = count * item_size(dtype);
  const std::size_t actual = bytes.size() - data_offset;
  if (actual != expected) {
    fail(ErrorKind::TruncatedPayload, "payload has " + std::to_string(actual) + " bytes, shape " +
                                          detail::shape_repr(shape) + " needs " + std::to_string(expected));
  }

  const auto rows = static_cast<Eigen::Index>(shape[0]);
  const auto cols = static_cast<Eigen::Index>(shape.size() == 2 ? shape[1] : 1);
  Tensor t{shape, dtype, Matrix(rows, cols)};
  const char* payload = bytes.data() + data_offset;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i * cols + j);
      if (dtype == Dtype::f8) {
        std::uint64_t w;
        std::memcpy(&w, payload + idx * 8, 8);
        t.data(i, j) = std::bit_cast<double>(detail::to_little(w));
      } else {
        std::uint32_t w;
        std::memcpy(&w, payload + idx * 4, 4);
        t.data(i, j) = static_cast<double>(std::bit_cast<float>(detail::to_little(w)));
      }
    }
  }
  return t;
}

inline std::string encode(const Tensor& t) {
  if (t.shape.empty() || t.shape.size() > 2) fail(ErrorKind::UnsupportedLayout, "tensor rank must be 1 or 2");
  const auto rows = static_cast<Eigen::Index>(t.shape[0]);
  const auto cols = static_cast<Eigen::Index>(t.shape.size() == 2 ? t.shape[1] : 1);
  if (t.data.rows() != rows || t.data.cols() != cols) {
    fail(ErrorKind::DimensionMismatch, "tensor data does not match declared shape " + detail::shape_repr(t.shape));
  }

  std::string header = "{'descr': '" + std::string(descr(t.dtype)) +
                       "', 'fortran_order': False, 'shape': " + detail::shape_repr(t.shape) + ", }";
  const std::size_t lead = std::to_string(t.shape[0]).size();
  header.append(kGrowthDigits > lead ? kGrowthDigits - lead : 0, ' ');
  const std::size_t hlen = header.size() + 1;
  const std::size_t pad = kAlign - ((kPreambleSize + hlen) % kAlign);
  header.append(pad, ' ');
  header.push_back('\n');
  if (header.size() > 0xffff) fail(ErrorKind::UnsupportedLayout, "header too long for NPY v1.0");

  std::string out(kMagic, sizeof(kMagic));
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(header.size() & 0xff));
  out.push_back(static_cast<char>((header.size() >> 8) & 0xff));
  out += header;

  const std::size_t isz = item_size(t.dtype);
  const std::size_t base = out.size();
  out.resize(base + static_cast<std::size_t>(rows * cols) * isz);
  char* payload = out.data() + base;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i * cols + j);
      if (t.dtype == Dtype::f8) {
        const auto w = detail::to_little(std::bit_cast<std::uint64_t>(t.data(i, j)));
        std::memcpy(payload + idx * 8, &w, 8);
      } else {
        const auto w = detail::to_little(std::bit_cast<std::uint32_t>(static_cast<float>(t.data(i, j))));
        std::memcpy(payload + idx * 4, &w, 4);
      }
    }
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open '" + path.string() + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::IoError, "short write to '" + path.string() + "'");
}

inline Tensor read_tensor(const std::filesystem::path& path) {
  try {
    return decode(read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::IoError) throw;
    throw Error(e.kind(), path.string() + ": " + e.detail());
  }
}

inline void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  write_file(path, encode(tensor));
}

/// Writes a matrix as a rank-2 tensor.
inline void write_tensor(const std::filesystem::path& path, const Matrix& m, Dtype dtype = Dtype::f8) {
  write_tensor(path, Tensor{{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, dtype, m});
}

/// Reads a d x n embedding file; rank-1 files become a single column.
inline EmbeddingMatrix read_embedding(const std::filesystem::path& path, std::string label = {}) {
  Tensor t = read_tensor(path);
  if (label.empty()) label = path.stem().string();
  return EmbeddingMatrix(std::move(t.data), std::move(label));
}

}  // namespace cure::npy
