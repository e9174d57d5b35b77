// wav-io.cc

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

#include <algorithm>
#include <cmath>

#include "binary-io.h"
#include "ivup/frontend.h"

namespace ivup {

Waveform ReadWav(const std::filesystem::path &path) {
  auto is = binary::OpenIn(path);
  const std::string what = "WAV '" + path.string() + "'";
  binary::ExpectMagic(is, "RIFF", what);
  binary::Get<std::uint32_t>(is, what);
  binary::ExpectMagic(is, "WAVE", what);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (true) {
    char id[4];
    if (!is.read(id, 4)) throw TruncatedError(what + ": no data chunk");
    auto size = binary::Get<std::uint32_t>(is, what);
    std::string_view chunk(id, 4);
    if (chunk == "fmt ") {
      format = binary::Get<std::uint16_t>(is, what);
      channels = binary::Get<std::uint16_t>(is, what);
      rate = binary::Get<std::uint32_t>(is, what);
      binary::Get<std::uint32_t>(is, what);  // byte rate
      binary::Get<std::uint16_t>(is, what);  // block align
      bits = binary::Get<std::uint16_t>(is, what);
      if (size > 16) is.ignore(size - 16 + (size & 1));
      have_fmt = true;
    } else if (chunk == "data") {
      if (!have_fmt) throw FormatError(what + ": data before fmt chunk");
      const bool pcm16 = format == 1 && bits == 16;
      const bool float32 = format == 3 && bits == 32;
      if (!pcm16 && !float32)
        throw FormatError(what + ": only PCM16 and float32 are supported");
      if (channels == 0) throw FormatError(what + ": zero channels");
      const std::size_t frame_bytes = channels * (bits / 8);
      const std::size_t n = size / frame_bytes;
      Waveform wav;
      wav.sample_rate_hz = rate;
      wav.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        if (pcm16)
          wav.samples[i] = binary::Get<std::int16_t>(is, what) / 32768.0;
        else
          wav.samples[i] = binary::Get<float>(is, what);
        is.ignore(frame_bytes - bits / 8);
      }
      return wav;
    } else {
      is.ignore(size + (size & 1));
    }
  }
}

void WriteWav(const std::filesystem::path &path, const Waveform &wav) {
  auto os = binary::OpenOut(path);
  const auto n = static_cast<std::uint32_t>(wav.samples.size());
  binary::PutMagic(os, "RIFF");
  binary::Put<std::uint32_t>(os, 36 + 2 * n);
  binary::PutMagic(os, "WAVE");
  binary::PutMagic(os, "fmt ");
  binary::Put<std::uint32_t>(os, 16);
  binary::Put<std::uint16_t>(os, 1);
  binary::Put<std::uint16_t>(os, 1);
  binary::Put<std::uint32_t>(os, static_cast<std::uint32_t>(wav.sample_rate_hz));
  binary::Put<std::uint32_t>(os, static_cast<std::uint32_t>(wav.sample_rate_hz) * 2);
  binary::Put<std::uint16_t>(os, 2);
  binary::Put<std::uint16_t>(os, 16);
  binary::PutMagic(os, "data");
  binary::Put<std::uint32_t>(os, 2 * n);
  for (double s : wav.samples) {
    double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    binary::Put<std::int16_t>(os, static_cast<std::int16_t>(scaled));
  }
}

}  // namespace ivup
