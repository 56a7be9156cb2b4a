// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.
//
// Patient/admission model, ICD-9 to CCS mapping, cohort filtering and
// construction of padded multi-hot batch tensors.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ligdoctor/numerics.h"

namespace ligdoctor {

enum class AdmissionType { kNewborn = 0, kElective = 1, kEmergency = 2, kUrgent = 3 };

inline constexpr std::size_t kAdmissionTypeCount = 4;

std::optional<AdmissionType> parse_admission_type(std::string_view text);
std::string_view to_string(AdmissionType type);

// Admission as read from disk, before mapping. `codes` are ICD-9 tokens for
// raw input or CCS labels for a prepared cohort.
struct RawAdmission {
  std::int64_t timestamp = 0;
  std::vector<std::string> codes;
  std::optional<AdmissionType> type;
  std::optional<double> duration_hours;
};

struct RawPatient {
  std::string patient_id;
  std::vector<RawAdmission> admissions;
};

struct Admission {
  std::int64_t timestamp = 0;
  std::set<std::string> codes;  // CCS labels
  std::optional<AdmissionType> type;
  std::optional<double> duration_hours;

  friend bool operator==(const Admission&, const Admission&) = default;
};

struct PatientRecord {
  std::string patient_id;
  std::vector<Admission> admissions;  // ascending timestamp

  friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

struct CcsMap {
  std::unordered_map<std::string, std::string> icd_to_ccs;
  std::map<std::string, std::string> descriptions;  // CCS label -> text

  std::size_t size() const { return icd_to_ccs.size(); }
  const std::string* lookup(const std::string& icd) const;
  // Description for a CCS label, or the label itself when none is known.
  std::string describe(const std::string& label) const;
};

// Reads `icd9,ccs_label[,description]` CSV with a header row. Throws
// InputError with the offending line number on malformed rows or on an ICD
// code mapped to two different labels. An empty file yields an empty map and
// a warning.
CcsMap load_ccs_map(const std::string& path, std::vector<std::string>* warnings = nullptr);
CcsMap parse_ccs_map(std::string_view text, std::vector<std::string>* warnings = nullptr);

struct MappingReport {
  std::size_t mapped_codes = 0;
  std::size_t unknown_codes = 0;
  std::map<std::string, std::size_t> unknown_by_code;
};

// Replaces each admission's ICD-9 codes by the set of their CCS labels.
// Unknown codes are dropped and counted.
PatientRecord map_icd_to_ccs(const RawPatient& raw, const CcsMap& map,
                             MappingReport* report = nullptr);

// Treats the raw codes as CCS labels already (prepared cohort files).
PatientRecord from_prepared(const RawPatient& raw);

struct FilterReport {
  std::size_t input_patients = 0;
  std::size_t input_admissions = 0;
  std::size_t removed_empty_admissions = 0;
  std::size_t removed_negative_duration = 0;
  std::size_t removed_patients = 0;  // fewer than two admissions left
  std::size_t kept_patients = 0;
  std::size_t kept_admissions = 0;

  std::string to_json() const;
};

std::vector<PatientRecord> filter_cohort(const std::vector<PatientRecord>& patients,
                                         FilterReport* report = nullptr);

class CodeVocabulary {
 public:
  CodeVocabulary() = default;
  explicit CodeVocabulary(std::vector<std::string> labels);

  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t index) const { return labels_.at(index); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<std::size_t> index_of(const std::string& label) const;

  friend bool operator==(const CodeVocabulary& a, const CodeVocabulary& b) {
    return a.labels_ == b.labels_;
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Lexicographically sorted distinct labels of the cohort. Throws InputError
// on an empty cohort.
CodeVocabulary build_vocabulary(const std::vector<PatientRecord>& patients);

struct ExtraFeatures {
  bool type = false;
  bool duration = false;
  bool interval = false;

  std::size_t width() const {
    return (type ? kAdmissionTypeCount : 0) + (duration ? 1 : 0) + (interval ? 1 : 0);
  }
  friend bool operator==(const ExtraFeatures&, const ExtraFeatures&) = default;
};

// Scales used to map duration and interval hours into [0, 1].
struct FeatureNormalization {
  double max_duration_hours = 0.0;
  double max_interval_hours = 0.0;

  friend bool operator==(const FeatureNormalization&, const FeatureNormalization&) = default;
};

FeatureNormalization compute_normalization(std::span<const PatientRecord> patients);

struct BatchTensor {
  Tensor3 x;        // steps x patients x (|D| + extras)
  Matrix mask;      // steps x patients, 1 where a pair exists
  Tensor3 targets;  // steps x patients x |D|
  std::size_t code_width = 0;
  ExtraFeatures extras;
  FeatureNormalization normalization;

  std::size_t steps() const { return x.dim0(); }
  std::size_t patients() const { return x.dim1(); }
  std::size_t feature_width() const { return x.dim2(); }
  // Number of unmasked (step, patient) positions.
  std::size_t valid_count() const;
  // Last unmasked step of patient h; patients always have at least one.
  std::size_t last_step(std::size_t h) const;
};

// Patient h with m admissions contributes inputs a_0..a_{m-2} and targets
// a_1..a_{m-1}. Without an explicit normalization, duration and interval are
// scaled by the batch maximum. Throws VocabularyError on unknown labels.
BatchTensor build_batch(std::span<const PatientRecord> patients, const CodeVocabulary& vocab,
                        const ExtraFeatures& extras,
                        const std::optional<FeatureNormalization>& normalization = std::nullopt);

// Inference layout: every admission is an input, targets are empty.
BatchTensor build_inputs(std::span<const PatientRecord> patients, const CodeVocabulary& vocab,
                         const ExtraFeatures& extras,
                         const FeatureNormalization& normalization);

// Multi-hot slots of one admission.
std::vector<double> encode_codes(const std::set<std::string>& codes, const CodeVocabulary& vocab);

// Patient JSON-lines. Accepts either an "icd9" or a "ccs" code array per
// admission; admissions are sorted by timestamp on load.
std::vector<RawPatient> parse_patients_jsonl(std::string_view text);
std::vector<RawPatient> read_patients_jsonl(const std::string& path);
// Writes a prepared cohort using the "ccs" key.
std::string cohort_to_jsonl(const std::vector<PatientRecord>& patients);
std::vector<PatientRecord> read_cohort_jsonl(const std::string& path);

}  // namespace ligdoctor
