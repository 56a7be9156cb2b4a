// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.
//
// Binary model container:
//
//   bytes 0..7   magic "LIGDOCKP"
//   u32          format version (little-endian)
//   u64          header length in bytes
//   header       JSON: shape, vocabulary, descriptions, normalization and
//                the name/rows/cols of every parameter tensor, in order
//   payload      every tensor's values as little-endian IEEE-754 doubles

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "ligdoctor/ehr_data.h"
#include "ligdoctor/network.h"

namespace ligdoctor {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Model {
  LigDoctorParams params;
  CodeVocabulary vocab;
  std::map<std::string, std::string> descriptions;  // CCS label -> text
  FeatureNormalization normalization;

  std::string describe(std::size_t index) const;
  friend bool operator==(const Model&, const Model&) = default;
};

std::string serialize_model(const Model& model);
// Throws InputError on a malformed or unsupported container.
Model deserialize_model(std::string_view bytes);

void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);

}  // namespace ligdoctor
