// Copyright 2026 The EmergeLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Little-endian primitive readers/writers shared by the binary file formats.

#ifndef EMERGELAB_SRC_BINARY_IO_HPP_
#define EMERGELAB_SRC_BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "emergelab/common.hpp"

namespace emergelab {

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string source)
      : in_(in), source_(std::move(source)) {}

  void Bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(source_ + ": truncated payload");
    }
  }
  std::uint8_t U8() {
    char c;
    Bytes(&c, 1);
    return static_cast<std::uint8_t>(c);
  }
  std::uint32_t U32() {
    unsigned char b[4];
    Bytes(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) |
           (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  }
  double F64() {
    unsigned char b[8];
    Bytes(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | b[i];
    return std::bit_cast<double>(bits);
  }

 private:
  std::istream& in_;
  std::string source_;
};

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void Bytes(const char* src, std::size_t n) {
    out_.write(src, static_cast<std::streamsize>(n));
  }
  void U8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void U32(std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff),
                       static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff),
                       static_cast<char>((v >> 24) & 0xff)};
    Bytes(b, 4);
  }
  void F64(double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    char b[8];
    for (int i = 0; i < 8; ++i) {
      b[i] = static_cast<char>(bits & 0xff);
      bits >>= 8;
    }
    Bytes(b, 8);
  }

 private:
  std::ostream& out_;
};

}  // namespace emergelab

#endif  // EMERGELAB_SRC_BINARY_IO_HPP_
