// binary-io.h

// Copyright 2026  The ivup Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef IVUP_BINARY_IO_H_
#define IVUP_BINARY_IO_H_

// Little-endian primitives shared by the binary containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "ivup/common.h"

namespace ivup::binary {

template <typename T>
T ToLittle(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
      std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
void Put(std::ostream &os, T v) {
  v = ToLittle(v);
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T Get(std::istream &is, std::string_view what) {
  T v;
  if (!is.read(reinterpret_cast<char *>(&v), sizeof(T)))
    throw TruncatedError(std::string(what) + ": unexpected end of input");
  return ToLittle(v);
}

inline void PutMagic(std::ostream &os, std::string_view magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void ExpectMagic(std::istream &is, std::string_view magic,
                        std::string_view what) {
  char buf[8] = {};
  if (!is.read(buf, static_cast<std::streamsize>(magic.size())))
    throw TruncatedError(std::string(what) + ": missing header");
  if (std::string_view(buf, magic.size()) != magic)
    throw FormatError(std::string(what) + ": bad magic, expected '" +
                      std::string(magic) + "'");
}

inline void PutDoubles(std::ostream &os, const double *data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char *>(data),
             static_cast<std::streamsize>(n * sizeof(double)));
  } else {
    for (std::size_t i = 0; i < n; ++i) Put(os, data[i]);
  }
}

inline void GetDoubles(std::istream &is, double *data, std::size_t n,
                       std::string_view what) {
  if (!is.read(reinterpret_cast<char *>(data),
               static_cast<std::streamsize>(n * sizeof(double))))
    throw TruncatedError(std::string(what) + ": truncated payload");
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < n; ++i) data[i] = ToLittle(data[i]);
}

inline std::ofstream OpenOut(const std::filesystem::path &path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  return os;
}

inline std::ifstream OpenIn(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path.string() + "' for reading");
  return is;
}

// Guards allocations driven by header fields read from untrusted files.
inline constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

}  // namespace ivup::binary

#endif  // IVUP_BINARY_IO_H_
