// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#include "ligdoctor/ehr_data.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "ligdoctor/error.h"
#include "ligdoctor/io.h"

namespace ligdoctor {

namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Trims whitespace and one level of single or double quotes, as found in the
// HCUP distribution files.
std::string unquote(std::string_view s) {
  std::string t = trim(s);
  if (t.size() >= 2 && (t.front() == '\'' || t.front() == '"') && t.back() == t.front()) {
    t = trim(std::string_view(t).substr(1, t.size() - 2));
  }
  return t;
}

// Splits one CSV line; honours double-quoted fields with "" escapes.
std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        current += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(current);
  return fields;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::optional<AdmissionType> parse_admission_type(std::string_view text) {
  const std::string t = lower(trim(text));
  if (t == "newborn") return AdmissionType::kNewborn;
  if (t == "elective") return AdmissionType::kElective;
  if (t == "emergency") return AdmissionType::kEmergency;
  if (t == "urgent") return AdmissionType::kUrgent;
  return std::nullopt;
}

std::string_view to_string(AdmissionType type) {
  switch (type) {
    case AdmissionType::kNewborn: return "newborn";
    case AdmissionType::kElective: return "elective";
    case AdmissionType::kEmergency: return "emergency";
    case AdmissionType::kUrgent: return "urgent";
  }
  return "unknown";
}

const std::string* CcsMap::lookup(const std::string& icd) const {
  auto it = icd_to_ccs.find(icd);
  return it == icd_to_ccs.end() ? nullptr : &it->second;
}

std::string CcsMap::describe(const std::string& label) const {
  auto it = descriptions.find(label);
  if (it == descriptions.end() || it->second.empty()) return label;
  return it->second;
}

CcsMap parse_ccs_map(std::string_view text, std::vector<std::string>* warnings) {
  CcsMap map;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;

    auto fields = split_csv(line);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() < 2 || lower(unquote(fields[0])) != "icd9" ||
          lower(unquote(fields[1])) != "ccs_label") {
        throw InputError("ccs map line " + std::to_string(line_no) +
                         ": expected header 'icd9,ccs_label[,description]'");
      }
      continue;
    }
    if (fields.size() < 2 || fields.size() > 3) {
      throw InputError("ccs map line " + std::to_string(line_no) + ": expected 2 or 3 columns, got " +
                       std::to_string(fields.size()));
    }
    std::string icd = unquote(fields[0]);
    std::string label = unquote(fields[1]);
    if (icd.empty() || label.empty()) {
      throw InputError("ccs map line " + std::to_string(line_no) + ": empty code or label");
    }
    auto [it, inserted] = map.icd_to_ccs.emplace(icd, label);
    if (!inserted && it->second != label) {
      throw InputError("ccs map line " + std::to_string(line_no) + ": ICD-9 code '" + icd +
                       "' maps to both '" + it->second + "' and '" + label + "'");
    }
    if (fields.size() == 3) {
      std::string description = unquote(fields[2]);
      if (!description.empty()) map.descriptions.emplace(label, std::move(description));
    }
  }
  if (map.icd_to_ccs.empty() && warnings != nullptr) {
    warnings->push_back("ccs map contains no mapping rows");
  }
  return map;
}

CcsMap load_ccs_map(const std::string& path, std::vector<std::string>* warnings) {
  return parse_ccs_map(read_file(path), warnings);
}

PatientRecord map_icd_to_ccs(const RawPatient& raw, const CcsMap& map, MappingReport* report) {
  PatientRecord out;
  out.patient_id = raw.patient_id;
  out.admissions.reserve(raw.admissions.size());
  for (const RawAdmission& a : raw.admissions) {
    Admission mapped{a.timestamp, {}, a.type, a.duration_hours};
    for (const std::string& icd : a.codes) {
      if (const std::string* label = map.lookup(icd)) {
        mapped.codes.insert(*label);
        if (report) ++report->mapped_codes;
      } else if (report) {
        ++report->unknown_codes;
        ++report->unknown_by_code[icd];
      }
    }
    out.admissions.push_back(std::move(mapped));
  }
  return out;
}

PatientRecord from_prepared(const RawPatient& raw) {
  PatientRecord out;
  out.patient_id = raw.patient_id;
  for (const RawAdmission& a : raw.admissions) {
    out.admissions.push_back(
        Admission{a.timestamp, std::set<std::string>(a.codes.begin(), a.codes.end()), a.type,
                  a.duration_hours});
  }
  return out;
}

std::string FilterReport::to_json() const {
  json j = {
      {"input_patients", input_patients},
      {"input_admissions", input_admissions},
      {"removed_admissions",
       {{"empty_codes", removed_empty_admissions},
        {"negative_duration", removed_negative_duration}}},
      {"removed_patients", {{"fewer_than_two_admissions", removed_patients}}},
      {"kept_patients", kept_patients},
      {"kept_admissions", kept_admissions},
  };
  return j.dump(2) + "\n";
}

std::vector<PatientRecord> filter_cohort(const std::vector<PatientRecord>& patients,
                                         FilterReport* report) {
  FilterReport local;
  std::vector<PatientRecord> kept;
  for (const PatientRecord& p : patients) {
    ++local.input_patients;
    PatientRecord filtered{p.patient_id, {}};
    for (const Admission& a : p.admissions) {
      ++local.input_admissions;
      if (a.codes.empty()) {
        ++local.removed_empty_admissions;
      } else if (a.duration_hours && *a.duration_hours < 0.0) {
        ++local.removed_negative_duration;
      } else {
        filtered.admissions.push_back(a);
      }
    }
    if (filtered.admissions.size() < 2) {
      ++local.removed_patients;
      continue;
    }
    local.kept_admissions += filtered.admissions.size();
    kept.push_back(std::move(filtered));
  }
  local.kept_patients = kept.size();
  if (report) *report = local;
  return kept;
}

CodeVocabulary::CodeVocabulary(std::vector<std::string> labels) : labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!index_.emplace(labels_[i], i).second) {
      throw InputError("vocabulary: duplicate label '" + labels_[i] + "'");
    }
  }
}

std::optional<std::size_t> CodeVocabulary::index_of(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

CodeVocabulary build_vocabulary(const std::vector<PatientRecord>& patients) {
  std::set<std::string> labels;
  for (const auto& p : patients)
    for (const auto& a : p.admissions) labels.insert(a.codes.begin(), a.codes.end());
  if (labels.empty()) throw InputError("cannot build a vocabulary from an empty cohort");
  return CodeVocabulary(std::vector<std::string>(labels.begin(), labels.end()));
}

FeatureNormalization compute_normalization(std::span<const PatientRecord> patients) {
  FeatureNormalization n;
  for (const auto& p : patients) {
    for (std::size_t i = 0; i < p.admissions.size(); ++i) {
      const Admission& a = p.admissions[i];
      n.max_duration_hours = std::max(n.max_duration_hours, a.duration_hours.value_or(0.0));
      if (i > 0) {
        const double hours =
            static_cast<double>(a.timestamp - p.admissions[i - 1].timestamp) / 3600.0;
        n.max_interval_hours = std::max(n.max_interval_hours, hours);
      }
    }
  }
  return n;
}

std::size_t BatchTensor::valid_count() const {
  std::size_t n = 0;
  for (double m : mask.data()) n += m != 0.0 ? 1 : 0;
  return n;
}

std::size_t BatchTensor::last_step(std::size_t h) const {
  std::size_t last = 0;
  for (std::size_t i = 0; i < mask.rows(); ++i)
    if (mask(i, h) != 0.0) last = i;
  return last;
}

std::vector<double> encode_codes(const std::set<std::string>& codes, const CodeVocabulary& vocab) {
  std::vector<double> slots(vocab.size(), 0.0);
  for (const std::string& c : codes) {
    auto idx = vocab.index_of(c);
    if (!idx) throw VocabularyError("code '" + c + "' is not in the model vocabulary");
    slots[*idx] = 1.0;
  }
  return slots;
}

namespace {

double scaled(double value, double max_value) {
  if (max_value <= 0.0) return 0.0;
  return std::clamp(value / max_value, 0.0, 1.0);
}

void write_input_row(Tensor3& x, std::size_t step, std::size_t h, const PatientRecord& p,
                     std::size_t adm, const CodeVocabulary& vocab, const ExtraFeatures& extras,
                     const FeatureNormalization& norm) {
  const Admission& a = p.admissions[adm];
  const auto slots = encode_codes(a.codes, vocab);
  for (std::size_t j = 0; j < slots.size(); ++j) x(step, h, j) = slots[j];
  std::size_t col = vocab.size();
  if (extras.type) {
    if (a.type) x(step, h, col + static_cast<std::size_t>(*a.type)) = 1.0;
    col += kAdmissionTypeCount;
  }
  if (extras.duration) {
    x(step, h, col) = scaled(a.duration_hours.value_or(0.0), norm.max_duration_hours);
    ++col;
  }
  if (extras.interval) {
    double hours = 0.0;
    if (adm > 0) {
      hours = static_cast<double>(a.timestamp - p.admissions[adm - 1].timestamp) / 3600.0;
    }
    x(step, h, col) = scaled(hours, norm.max_interval_hours);
  }
}

}  // namespace

BatchTensor build_batch(std::span<const PatientRecord> patients, const CodeVocabulary& vocab,
                        const ExtraFeatures& extras,
                        const std::optional<FeatureNormalization>& normalization) {
  std::size_t steps = 0;
  for (const auto& p : patients) {
    if (p.admissions.size() < 2) {
      throw InputError("build_batch: patient '" + p.patient_id + "' has fewer than two admissions");
    }
    steps = std::max(steps, p.admissions.size() - 1);
  }
  BatchTensor batch;
  batch.code_width = vocab.size();
  batch.extras = extras;
  batch.normalization = normalization ? *normalization : compute_normalization(patients);
  batch.x = Tensor3(steps, patients.size(), vocab.size() + extras.width());
  batch.targets = Tensor3(steps, patients.size(), vocab.size());
  batch.mask = Matrix(steps, patients.size());
  for (std::size_t h = 0; h < patients.size(); ++h) {
    const PatientRecord& p = patients[h];
    for (std::size_t i = 0; i + 1 < p.admissions.size(); ++i) {
      write_input_row(batch.x, i, h, p, i, vocab, extras, batch.normalization);
      const auto next = encode_codes(p.admissions[i + 1].codes, vocab);
      for (std::size_t j = 0; j < next.size(); ++j) batch.targets(i, h, j) = next[j];
      batch.mask(i, h) = 1.0;
    }
  }
  return batch;
}

BatchTensor build_inputs(std::span<const PatientRecord> patients, const CodeVocabulary& vocab,
                         const ExtraFeatures& extras, const FeatureNormalization& normalization) {
  std::size_t steps = 0;
  for (const auto& p : patients) {
    if (p.admissions.empty()) {
      throw InputError("build_inputs: patient '" + p.patient_id + "' has no admissions");
    }
    steps = std::max(steps, p.admissions.size());
  }
  BatchTensor batch;
  batch.code_width = vocab.size();
  batch.extras = extras;
  batch.normalization = normalization;
  batch.x = Tensor3(steps, patients.size(), vocab.size() + extras.width());
  batch.targets = Tensor3(steps, patients.size(), vocab.size());
  batch.mask = Matrix(steps, patients.size());
  for (std::size_t h = 0; h < patients.size(); ++h) {
    for (std::size_t i = 0; i < patients[h].admissions.size(); ++i) {
      write_input_row(batch.x, i, h, patients[h], i, vocab, extras, normalization);
      batch.mask(i, h) = 1.0;
    }
  }
  return batch;
}

std::vector<RawPatient> parse_patients_jsonl(std::string_view text) {
  std::vector<RawPatient> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = "patients line " + std::to_string(line_no) + ": ";
    try {
      json j = json::parse(line);
      RawPatient p;
      const json& id = j.at("patient_id");
      p.patient_id = id.is_string() ? id.get<std::string>() : id.dump();
      for (const json& a : j.at("admissions")) {
        RawAdmission adm;
        adm.timestamp = a.at("timestamp").get<std::int64_t>();
        const char* key = a.contains("icd9") ? "icd9" : "ccs";
        for (const json& c : a.at(key)) {
          adm.codes.push_back(c.is_string() ? c.get<std::string>() : c.dump());
        }
        if (a.contains("type") && !a["type"].is_null()) {
          const std::string t = a["type"].get<std::string>();
          adm.type = parse_admission_type(t);
          if (!adm.type) throw InputError(where + "unknown admission type '" + t + "'");
        }
        if (a.contains("duration_hours") && !a["duration_hours"].is_null()) {
          adm.duration_hours = a["duration_hours"].get<double>();
        }
        p.admissions.push_back(std::move(adm));
      }
      std::stable_sort(p.admissions.begin(), p.admissions.end(),
                       [](const RawAdmission& x, const RawAdmission& y) {
                         return x.timestamp < y.timestamp;
                       });
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw InputError(where + e.what());
    }
  }
  return out;
}

std::vector<RawPatient> read_patients_jsonl(const std::string& path) {
  return parse_patients_jsonl(read_file(path));
}

std::string cohort_to_jsonl(const std::vector<PatientRecord>& patients) {
  std::string out;
  for (const PatientRecord& p : patients) {
    json admissions = json::array();
    for (const Admission& a : p.admissions) {
      json adm = {{"timestamp", a.timestamp},
                  {"ccs", std::vector<std::string>(a.codes.begin(), a.codes.end())},
                  {"type", nullptr},
                  {"duration_hours", nullptr}};
      if (a.type) adm["type"] = std::string(to_string(*a.type));
      if (a.duration_hours) adm["duration_hours"] = *a.duration_hours;
      admissions.push_back(std::move(adm));
    }
    json j = {{"patient_id", p.patient_id}, {"admissions", std::move(admissions)}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<PatientRecord> read_cohort_jsonl(const std::string& path) {
  std::vector<PatientRecord> out;
  for (const RawPatient& raw : read_patients_jsonl(path)) out.push_back(from_prepared(raw));
  return out;
}

}  // namespace ligdoctor
