// feature-io.cc

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

#include "binary-io.h"
#include "ivup/frontend.h"

namespace ivup {

namespace {

constexpr std::string_view kFeatureMagic = "UVFM";
constexpr std::string_view kUncertaintyMagic = "UVUN";

// flags: bits 0-15 = log-energy column + 1 (0 = none), bits 16-23 = kind.
std::uint32_t PackFlags(const FeatureMatrix &fm) {
  return static_cast<std::uint32_t>(fm.log_energy_dim + 1) |
         (static_cast<std::uint32_t>(fm.kind) << 16);
}

struct Header {
  std::uint64_t rows = 0, cols = 0;
  std::uint32_t flags = 0;
};

void WriteContainer(std::ostream &os, std::string_view magic,
                    const RowMatrix &m, std::uint32_t flags,
                    const std::vector<std::uint8_t> *mask) {
  binary::PutMagic(os, magic);
  binary::Put<std::uint32_t>(os, kFeatureFormatVersion);
  binary::Put<std::uint64_t>(os, m.rows());
  binary::Put<std::uint64_t>(os, m.cols());
  binary::Put<std::uint32_t>(os, flags);
  binary::PutDoubles(os, m.data(), m.size());
  if (mask != nullptr) {
    os.write(reinterpret_cast<const char *>(mask->data()),
             static_cast<std::streamsize>(mask->size()));
  } else {
    std::vector<char> ones(m.rows(), 1);
    os.write(ones.data(), static_cast<std::streamsize>(ones.size()));
  }
  if (!os) throw Error(std::string(magic) + ": write failed");
}

Header ReadHeader(std::istream &is, std::string_view magic) {
  binary::ExpectMagic(is, magic, magic);
  auto version = binary::Get<std::uint32_t>(is, magic);
  if (version != kFeatureFormatVersion)
    throw FormatError(std::string(magic) + ": unsupported version " +
                      std::to_string(version));
  Header h;
  h.rows = binary::Get<std::uint64_t>(is, magic);
  h.cols = binary::Get<std::uint64_t>(is, magic);
  h.flags = binary::Get<std::uint32_t>(is, magic);
  if (h.rows == 0 || h.cols == 0)
    throw FormatError(std::string(magic) + ": empty matrix (L or F is 0)");
  if (h.cols > binary::kMaxElements / h.rows)
    throw FormatError(std::string(magic) + ": implausible dimensions");
  return h;
}

RowMatrix ReadPayload(std::istream &is, const Header &h, std::string_view what,
                      std::vector<std::uint8_t> &mask) {
  RowMatrix m(static_cast<Eigen::Index>(h.rows),
              static_cast<Eigen::Index>(h.cols));
  binary::GetDoubles(is, m.data(), m.size(), what);
  mask.resize(h.rows);
  if (!is.read(reinterpret_cast<char *>(mask.data()),
               static_cast<std::streamsize>(h.rows)))
    throw TruncatedError(std::string(what) + ": truncated VAD mask");
  if (!m.allFinite())
    throw NonFiniteError(std::string(what) + ": non-finite value in payload");
  return m;
}

}  // namespace

void WriteFeatures(std::ostream &os, const FeatureMatrix &fm) {
  fm.Validate();
  WriteContainer(os, kFeatureMagic, fm.frames, PackFlags(fm), &fm.vad_mask);
}

FeatureMatrix ReadFeatures(std::istream &is, std::string utt_id) {
  Header h = ReadHeader(is, kFeatureMagic);
  FeatureMatrix fm;
  fm.frames = ReadPayload(is, h, kFeatureMagic, fm.vad_mask);
  for (auto &v : fm.vad_mask) v = v != 0;
  fm.log_energy_dim = static_cast<int>(h.flags & 0xffffu) - 1;
  fm.kind = static_cast<FeatureKind>((h.flags >> 16) & 0xffu);
  if (fm.kind != FeatureKind::kGeneric && fm.kind != FeatureKind::kMfcc)
    throw FormatError("UVFM: unknown feature kind");
  if (fm.log_energy_dim >= fm.Dim())
    throw FormatError("UVFM: log-energy column out of range");
  fm.utt_id = std::move(utt_id);
  return fm;
}

void WriteFeatures(const std::filesystem::path &path, const FeatureMatrix &fm) {
  auto os = binary::OpenOut(path);
  WriteFeatures(os, fm);
}

FeatureMatrix ReadFeatures(const std::filesystem::path &path) {
  auto is = binary::OpenIn(path);
  return ReadFeatures(is, path.stem().string());
}

void WriteUncertainty(std::ostream &os, const UncertaintySequence &unc) {
  unc.Validate();
  if (unc.NumFrames() == 0 || unc.Dim() == 0)
    throw InvalidArgument("uncertainty sequence is empty");
  WriteContainer(os, kUncertaintyMagic, unc.diag_vars, 0, nullptr);
}

UncertaintySequence ReadUncertainty(std::istream &is, std::string utt_id) {
  Header h = ReadHeader(is, kUncertaintyMagic);
  std::vector<std::uint8_t> unused;
  UncertaintySequence unc;
  unc.diag_vars = ReadPayload(is, h, kUncertaintyMagic, unused);
  unc.utt_id = std::move(utt_id);
  if ((unc.diag_vars.array() < 0.0).any())
    throw FormatError("UVUN: negative variance in payload");
  return unc;
}

void WriteUncertainty(const std::filesystem::path &path,
                      const UncertaintySequence &unc) {
  auto os = binary::OpenOut(path);
  WriteUncertainty(os, unc);
}

UncertaintySequence ReadUncertainty(const std::filesystem::path &path) {
  auto is = binary::OpenIn(path);
  return ReadUncertainty(is, path.stem().string());
}

}  // namespace ivup
