/* Copyright 2026 The qlab Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

/**
 * Matrix files.
 *
 *   csv  first line "m,N", then m lines of N comma-separated reals.
 *   raw  16-byte header: "QLAB", u32 m, u32 N, u32 0 (all little-endian),
 *        followed by m * N IEEE-754 doubles, little-endian, row-major.
 */

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qlab/common.hpp"

namespace qlab {

enum class MatrixFormat { kCsv, kRaw };

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_real(std::string_view token, std::size_t line_no) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  require(ec == std::errc() && ptr == token.data() + token.size() && !token.empty(),
          ErrorCode::kParseError,
          "line " + std::to_string(line_no) + ": cannot parse '" + std::string(token) + "'");
  return value;
}

inline Index parse_dim(std::string_view token) {
  Index value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  require(ec == std::errc() && ptr == token.data() + token.size() && value > 0,
          ErrorCode::kParseError, "bad dimension '" + std::string(token) + "' in header");
  return value;
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

inline void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline double get_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{p[i]} << (8 * i);
  return std::bit_cast<double>(bits);
}

inline void require_finite(const Matrix& x) {
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j)
      require(std::isfinite(x(i, j)), ErrorCode::kNonFiniteEntry,
              "non-finite entry at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
}

}  // namespace detail

inline Matrix parse_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  for (auto line : detail::split(text, '\n'))
    if (!line.empty()) lines.push_back(line);
  require(!lines.empty(), ErrorCode::kParseError, "empty csv input");
  const auto header = detail::split(lines[0], ',');
  require(header.size() == 2, ErrorCode::kParseError, "csv header must be 'm,N'");
  const Index m = detail::parse_dim(header[0]);
  const Index n = detail::parse_dim(header[1]);
  require(static_cast<Index>(lines.size()) - 1 == m, ErrorCode::kDimensionHeaderMismatch,
          "header declares " + std::to_string(m) + " rows, found " +
              std::to_string(lines.size() - 1));
  Matrix x(m, n);
  for (Index i = 0; i < m; ++i) {
    const auto cells = detail::split(lines[static_cast<std::size_t>(i) + 1], ',');
    require(static_cast<Index>(cells.size()) == n, ErrorCode::kParseError,
            "line " + std::to_string(i + 2) + ": expected " + std::to_string(n) +
                " values, found " + std::to_string(cells.size()));
    for (Index j = 0; j < n; ++j)
      x(i, j) = detail::parse_real(cells[static_cast<std::size_t>(j)],
                                   static_cast<std::size_t>(i) + 2);
  }
  detail::require_finite(x);
  return x;
}

inline std::string format_csv(const MatrixRef& x) {
  std::string out = std::to_string(x.rows()) + "," + std::to_string(x.cols()) + "\n";
  std::array<char, 64> buf{};
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      if (j > 0) out.push_back(',');
      const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x(i, j));
      out.append(buf.data(), res.ptr);
    }
    out.push_back('\n');
  }
  return out;
}

inline Matrix parse_raw(std::string_view bytes) {
  require(bytes.size() >= 16, ErrorCode::kParseError, "raw file shorter than its header");
  require(bytes.substr(0, 4) == "QLAB", ErrorCode::kParseError, "raw file lacks QLAB magic");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t m = detail::get_u32(p + 4);
  const std::uint32_t n = detail::get_u32(p + 8);
  require(detail::get_u32(p + 12) == 0, ErrorCode::kParseError, "raw header reserved field is not 0");
  require(m > 0 && n > 0, ErrorCode::kParseError, "raw header has a zero dimension");
  const std::uint64_t expected = 16 + 8ull * m * n;
  require(bytes.size() == expected, ErrorCode::kDimensionHeaderMismatch,
          "raw header declares " + std::to_string(m) + "x" + std::to_string(n) + " (" +
              std::to_string(expected) + " bytes), file has " + std::to_string(bytes.size()));
  Matrix x(m, n);
  const unsigned char* data = p + 16;
  for (std::uint32_t i = 0; i < m; ++i)
    for (std::uint32_t j = 0; j < n; ++j) x(i, j) = detail::get_f64(data + 8ull * (i * n + j));
  detail::require_finite(x);
  return x;
}

inline std::string format_raw(const MatrixRef& x) {
  std::string out = "QLAB";
  detail::put_u32(out, static_cast<std::uint32_t>(x.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(x.cols()));
  detail::put_u32(out, 0);
  out.reserve(16 + 8 * static_cast<std::size_t>(x.size()));
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) detail::put_f64(out, x(i, j));
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kParseError, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kInvalidArgument, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::kInvalidArgument, "write failed for " + path);
}

inline Matrix load_matrix(const std::string& path, MatrixFormat format) {
  const std::string bytes = read_file(path);
  return format == MatrixFormat::kCsv ? parse_csv(bytes) : parse_raw(bytes);
}

inline void save_matrix(const std::string& path, const MatrixRef& x, MatrixFormat format) {
  write_file(path, format == MatrixFormat::kCsv ? format_csv(x) : format_raw(x));
}

/// FNV-1a 64 over the raw encoding, as 16 lowercase hex digits.
inline std::string matrix_digest(const MatrixRef& x) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : format_raw(x)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

}  // namespace qlab
