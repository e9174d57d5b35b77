// model-io.cc

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

// JSON model files for the UBM and the scoring back-end.

#include <fstream>
#include <sstream>

#include "ivup/backend.h"
#include "ivup/gmm.h"
#include "json.hpp"

namespace ivup {

namespace {

using json = nlohmann::json;

constexpr int kGmmFormatVersion = 1;
constexpr int kBackendFormatVersion = 1;

json VectorToJson(const Vector &v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

template <typename M>
json MatrixToJson(const M &m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

Vector VectorFromJson(const json &j, const char *what) {
  if (!j.is_array()) throw FormatError(std::string(what) + ": expected array");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw FormatError(std::string(what) + ": expected numbers");
    v(i) = j[i].get<double>();
  }
  return v;
}

template <typename M>
M MatrixFromJson(const json &j, Eigen::Index rows, Eigen::Index cols,
                 const char *what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw FormatError(std::string(what) + ": expected " + std::to_string(rows) +
                      " rows");
  M m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    Vector row = VectorFromJson(j[r], what);
    if (row.size() != cols)
      throw FormatError(std::string(what) + ": expected " +
                        std::to_string(cols) + " columns");
    m.row(r) = row.transpose();
  }
  return m;
}

json Parse(const std::string &text, const char *what) {
  try {
    return json::parse(text);
  } catch (const json::exception &e) {
    throw FormatError(std::string(what) + ": " + e.what());
  }
}

const json &Field(const json &j, const char *key, const char *what) {
  if (!j.is_object() || !j.contains(key))
    throw FormatError(std::string(what) + ": missing field '" + key + "'");
  return j.at(key);
}

Eigen::Index Dim(const json &j, const char *key, const char *what) {
  const json &v = Field(j, key, what);
  if (!v.is_number_integer() || v.get<long long>() < 1)
    throw FormatError(std::string(what) + ": '" + key +
                      "' must be a positive integer");
  return v.get<Eigen::Index>();
}

void CheckVersion(const json &j, int expected, const char *what) {
  const json &v = Field(j, "format_version", what);
  if (!v.is_number_integer() || v.get<int>() != expected)
    throw FormatError(std::string(what) + ": unsupported format version");
}

std::string ReadText(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path.string() + "' for reading");
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void WriteText(const std::filesystem::path &path, const std::string &text) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  os << text << '\n';
  if (!os) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace

std::string GmmToJson(const GmmModel &gmm) {
  gmm.Validate();
  json j;
  j["format_version"] = kGmmFormatVersion;
  j["num_components"] = gmm.NumComponents();
  j["dim"] = gmm.Dim();
  j["weights"] = VectorToJson(gmm.weights);
  j["means"] = MatrixToJson(gmm.means);
  j["vars"] = MatrixToJson(gmm.vars);
  return j.dump(1);
}

GmmModel GmmFromJson(const std::string &text) {
  const char *what = "GMM model";
  json j = Parse(text, what);
  CheckVersion(j, kGmmFormatVersion, what);
  const Eigen::Index C = Dim(j, "num_components", what),
                     F = Dim(j, "dim", what);
  GmmModel gmm;
  gmm.weights = VectorFromJson(Field(j, "weights", what), what);
  if (gmm.weights.size() != C)
    throw FormatError("GMM model: expected " + std::to_string(C) + " weights");
  gmm.means = MatrixFromJson<RowMatrix>(Field(j, "means", what), C, F, what);
  gmm.vars = MatrixFromJson<RowMatrix>(Field(j, "vars", what), C, F, what);
  gmm.Validate();
  return gmm;
}

void WriteGmm(const std::filesystem::path &path, const GmmModel &gmm) {
  WriteText(path, GmmToJson(gmm));
}

GmmModel ReadGmm(const std::filesystem::path &path) {
  return GmmFromJson(ReadText(path));
}

std::string BackendToJson(const BackendModel &model) {
  model.plda.Validate();
  json j;
  j["format_version"] = kBackendFormatVersion;
  j["ivector_dim"] = model.whiten.mean.size();
  j["lda_dim"] = model.lda.projection.cols();
  j["whiten_mean"] = VectorToJson(model.whiten.mean);
  j["whiten_transform"] = MatrixToJson(model.whiten.transform);
  j["lda_projection"] = MatrixToJson(model.lda.projection);
  j["lda_eigenvalues"] = VectorToJson(model.lda.eigenvalues);
  j["plda_mu"] = VectorToJson(model.plda.mu);
  j["plda_between"] = MatrixToJson(model.plda.between_cov);
  j["plda_within"] = MatrixToJson(model.plda.within_cov);
  return j.dump(1);
}

BackendModel BackendFromJson(const std::string &text) {
  const char *what = "backend model";
  json j = Parse(text, what);
  CheckVersion(j, kBackendFormatVersion, what);
  const Eigen::Index D = Dim(j, "ivector_dim", what),
                     R = Dim(j, "lda_dim", what);
  BackendModel m;
  m.whiten.mean = VectorFromJson(Field(j, "whiten_mean", what), what);
  if (m.whiten.mean.size() != D)
    throw FormatError("backend model: whitening mean has wrong size");
  m.whiten.transform =
      MatrixFromJson<Matrix>(Field(j, "whiten_transform", what), D, D, what);
  m.lda.projection =
      MatrixFromJson<Matrix>(Field(j, "lda_projection", what), D, R, what);
  m.lda.eigenvalues = VectorFromJson(Field(j, "lda_eigenvalues", what), what);
  if (m.lda.eigenvalues.size() != R)
    throw FormatError("backend model: LDA eigenvalues have wrong size");
  m.plda.mu = VectorFromJson(Field(j, "plda_mu", what), what);
  if (m.plda.mu.size() != R)
    throw FormatError("backend model: PLDA mean has wrong size");
  m.plda.between_cov =
      MatrixFromJson<Matrix>(Field(j, "plda_between", what), R, R, what);
  m.plda.within_cov =
      MatrixFromJson<Matrix>(Field(j, "plda_within", what), R, R, what);
  CheckFinite(m.whiten.transform, what);
  CheckFinite(m.lda.projection, what);
  m.plda.Validate();
  return m;
}

void WriteBackend(const std::filesystem::path &path, const BackendModel &model) {
  WriteText(path, BackendToJson(model));
}

BackendModel ReadBackend(const std::filesystem::path &path) {
  return BackendFromJson(ReadText(path));
}

}  // namespace ivup
