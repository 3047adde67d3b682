#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

#include <json.hpp>

#include "wts/models.hpp"

namespace wts {

// Model snapshots use hex-float strings so 64-bit values round-trip
// bit-exactly through JSON.
inline std::string encode_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

inline double decode_double(const std::string& s) {
  return std::strtod(s.c_str(), nullptr);
}

inline nlohmann::json matrix_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(encode_double(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat matrix_from_json(const nlohmann::json& j) {
  Mat m(j.size(), j.empty() ? 0 : j[0].size());
  for (int i = 0; i < m.rows(); ++i)
    for (int jj = 0; jj < m.cols(); ++jj)
      m(i, jj) = decode_double(j[i][jj].get<std::string>());
  return m;
}

inline nlohmann::json vector_to_json(const Vec& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(encode_double(v[i]));
  return arr;
}

inline Vec vector_from_json(const nlohmann::json& j) {
  Vec v(j.size());
  for (int i = 0; i < v.size(); ++i)
    v[i] = decode_double(j[i].get<std::string>());
  return v;
}

inline nlohmann::json mlp_to_json(const MlpParams& m) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["type"] = "mlp";
  for (size_t l = 0; l < m.W.size(); ++l) {
    j["W"].push_back(matrix_to_json(m.W[l]));
    j["b"].push_back(vector_to_json(m.b[l]));
  }
  return j;
}

inline MlpParams mlp_from_json(const nlohmann::json& j) {
  MlpParams m;
  for (const auto& w : j.at("W")) m.W.push_back(matrix_from_json(w));
  for (const auto& b : j.at("b")) m.b.push_back(vector_from_json(b));
  m.check();
  return m;
}

inline nlohmann::json head_to_json(const SoftmaxHead& h) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["type"] = "softmax_head";
  j["W"] = matrix_to_json(h.W);
  return j;
}

inline SoftmaxHead head_from_json(const nlohmann::json& j) {
  SoftmaxHead h;
  h.W = matrix_from_json(j.at("W"));
  return h;
}

inline nlohmann::json ensemble_to_json(const HeadEnsemble& e) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["type"] = "head_ensemble";
  for (const auto& h : e.heads) j["heads"].push_back(head_to_json(h));
  j["mix_logits"] = vector_to_json(e.mix_logits);
  return j;
}

inline HeadEnsemble ensemble_from_json(const nlohmann::json& j) {
  HeadEnsemble e;
  for (const auto& h : j.at("heads")) e.heads.push_back(head_from_json(h));
  e.mix_logits = vector_from_json(j.at("mix_logits"));
  return e;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << "\n";
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return nlohmann::json::parse(in);
}

}  // namespace wts
