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
#include <gtest/gtest.h>

#include <filesystem>
#include <limits>

#include "qlab/io.hpp"
#include "qlab/rng.hpp"

namespace qlab {
namespace {

ErrorCode code_of_csv(const std::string& text) {
  try {
    parse_csv(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInvalidArgument;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("qlab_io_" + name)).string();
}

TEST(Io, CsvIdentity) {
  EXPECT_EQ(parse_csv("2,2\n1,0\n0,1\n"), Matrix::Identity(2, 2));
  EXPECT_EQ(parse_csv("2,2\r\n1, 0\r\n0 ,1"), Matrix::Identity(2, 2));
}

TEST(Io, CsvErrors) {
  EXPECT_EQ(code_of_csv("2,2\n1,0\n0\n"), ErrorCode::kParseError);
  EXPECT_EQ(code_of_csv("2,2\n1,x\n0,1\n"), ErrorCode::kParseError);
  EXPECT_EQ(code_of_csv("3,2\n1,0\n0,1\n"), ErrorCode::kDimensionHeaderMismatch);
  EXPECT_EQ(code_of_csv("2,2\n1,nan\n0,1\n"), ErrorCode::kNonFiniteEntry);
  EXPECT_EQ(code_of_csv(""), ErrorCode::kParseError);
}

TEST(Io, RawHandBuiltFile) {
  std::string bytes = "QLAB";
  bytes += std::string("\x03\x00\x00\x00\x02\x00\x00\x00\x00\x00\x00\x00", 12);
  const double values[6] = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  const Matrix x = parse_raw(bytes);
  ASSERT_EQ(x.rows(), 3);
  ASSERT_EQ(x.cols(), 2);
  EXPECT_EQ(x(0, 1), 2.0);
  EXPECT_EQ(x(2, 0), 5.0);
  EXPECT_THROW(parse_raw(bytes.substr(0, bytes.size() - 8)), Error);
  bytes[0] = 'X';
  EXPECT_THROW(parse_raw(bytes), Error);
}

TEST(Io, RawRoundTripIsBitExact) {
  Matrix x = gaussian_matrix(7, 5, 1) * 1e-3;
  x(0, 0) = std::numeric_limits<double>::denorm_min();
  x(1, 1) = -0.0;
  const auto path = temp_path("round.raw");
  save_matrix(path, x, MatrixFormat::kRaw);
  const Matrix y = load_matrix(path, MatrixFormat::kRaw);
  EXPECT_EQ(format_raw(x), format_raw(y));
  std::filesystem::remove(path);
}

TEST(Io, CsvRoundTripIsExact) {
  const Matrix x = gaussian_matrix(4, 6, 2);
  const auto path = temp_path("round.csv");
  save_matrix(path, x, MatrixFormat::kCsv);
  EXPECT_EQ(load_matrix(path, MatrixFormat::kCsv), x);
  std::filesystem::remove(path);
}

TEST(Io, DigestDistinguishesMatrices) {
  const Matrix x = gaussian_matrix(3, 3, 3);
  Matrix y = x;
  y(2, 2) = std::nextafter(y(2, 2), 10.0);
  EXPECT_EQ(matrix_digest(x).size(), 16u);
  EXPECT_EQ(matrix_digest(x), matrix_digest(Matrix(x)));
  EXPECT_NE(matrix_digest(x), matrix_digest(y));
}

}  // namespace
}  // namespace qlab
