// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#include "ligdoctor/synth.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"
#include "ligdoctor/error.h"
#include "ligdoctor/evaluation.h"

namespace ligdoctor {

namespace {

constexpr std::int64_t kEpochStart = 946684800;  // 2000-01-01
constexpr double kSecondsPerDay = 86400.0;

std::size_t label_width(std::size_t vocab_size) {
  return std::to_string(vocab_size > 0 ? vocab_size - 1 : 0).size();
}

// Draws `count` distinct codes from [0, vocab) excluding `taken`.
std::vector<std::size_t> draw_distinct(std::size_t vocab, std::size_t count,
                                       const std::set<std::size_t>& taken, SeededRng& rng) {
  std::set<std::size_t> out;
  const std::size_t available = vocab - taken.size();
  count = std::min(count, available);
  while (out.size() < count) {
    const std::size_t c = rng.uniform_index(vocab);
    if (!taken.count(c)) out.insert(c);
  }
  return {out.begin(), out.end()};
}

AdmissionType draw_type(bool first, SeededRng& rng) {
  if (first && rng.bernoulli(0.05)) return AdmissionType::kNewborn;
  const double u = rng.uniform();
  if (u < 0.2) return AdmissionType::kElective;
  if (u < 0.85) return AdmissionType::kEmergency;
  return AdmissionType::kUrgent;
}

std::size_t parse_code(const std::string& label) {
  std::size_t pos = 0;
  const unsigned long v = std::stoul(label, &pos);
  if (pos != label.size()) throw InputError("oracle: non-numeric synthetic label '" + label + "'");
  return v;
}

}  // namespace

void SynthSpec::validate() const {
  if (vocab_size == 0) throw InputError("synth: vocab_size must be positive");
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) throw InputError("synth: noise_rate must lie in [0, 1)");
  if (min_admissions < 2 || max_admissions < min_admissions) {
    throw InputError("synth: admission bounds must satisfy 2 <= min <= max");
  }
  if (!(extra_admission_prob >= 0.0 && extra_admission_prob < 1.0)) {
    throw InputError("synth: extra_admission_prob must lie in [0, 1)");
  }
  if (transition_kernel.empty() || codes_per_state.size() != transition_kernel.size()) {
    throw InputError("synth: kernel and state code sets must be non-empty and aligned");
  }
  for (std::size_t next : transition_kernel) {
    if (next >= transition_kernel.size()) throw InputError("synth: kernel target out of range");
  }
  for (const auto& codes : codes_per_state) {
    if (codes.empty()) throw InputError("synth: every state needs at least one code");
    if (codes.size() > vocab_size) throw InputError("synth: state code set exceeds the vocabulary");
    for (std::size_t c : codes) {
      if (c >= vocab_size) throw InputError("synth: state code outside the vocabulary");
    }
  }
}

SynthSpec make_synth_spec(std::size_t n_patients, std::size_t n_states, double noise_rate,
                          std::uint64_t seed, std::size_t vocab_size,
                          double mean_codes_per_admission) {
  if (n_states == 0) throw InputError("synth: need at least one latent state");
  SynthSpec spec;
  spec.n_patients = n_patients;
  spec.vocab_size = vocab_size;
  spec.mean_codes_per_admission = mean_codes_per_admission;
  spec.noise_rate = noise_rate;
  spec.seed = seed;

  SeededRng rng(derive_seed(seed, 0x4b45524e));
  spec.transition_kernel.resize(n_states);
  std::iota(spec.transition_kernel.begin(), spec.transition_kernel.end(), 0);
  rng.shuffle(spec.transition_kernel);

  const double state_mean = mean_codes_per_admission * (1.0 - noise_rate);
  for (std::size_t s = 0; s < n_states; ++s) {
    const double draw = std::round(rng.normal(state_mean, 2.0));
    const auto size = static_cast<std::size_t>(
        std::clamp(draw, 1.0, static_cast<double>(vocab_size)));
    spec.codes_per_state.push_back(draw_distinct(vocab_size, size, {}, rng));
  }
  spec.validate();
  return spec;
}

std::string synth_code_label(std::size_t code, std::size_t vocab_size) {
  std::string digits = std::to_string(code);
  const std::size_t width = label_width(vocab_size);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return digits;
}

std::vector<SynthPatient> generate_patients(const SynthSpec& spec) {
  spec.validate();
  std::vector<SynthPatient> out;
  out.reserve(spec.n_patients);
  // Expected noise codes per emitted state code.
  const double noise_per_code = spec.noise_rate / (1.0 - spec.noise_rate);
  for (std::size_t i = 0; i < spec.n_patients; ++i) {
    SeededRng rng(derive_seed(spec.seed, i));
    SynthPatient patient;
    patient.record.patient_id = "synth-" + std::to_string(i);

    std::size_t count = spec.min_admissions;
    while (count < spec.max_admissions && rng.bernoulli(spec.extra_admission_prob)) ++count;

    std::size_t state = rng.uniform_index(spec.state_count());
    auto timestamp = kEpochStart + static_cast<std::int64_t>(rng.uniform() * 3650.0 * kSecondsPerDay);
    for (std::size_t a = 0; a < count; ++a) {
      if (a > 0) {
        state = spec.transition_kernel[state];
        const double gap_days = 7.0 + rng.uniform() * 400.0;
        timestamp += static_cast<std::int64_t>(gap_days * kSecondsPerDay);
      }
      const auto& state_codes = spec.codes_per_state[state];
      std::set<std::size_t> codes(state_codes.begin(), state_codes.end());
      const double expected_noise = noise_per_code * static_cast<double>(state_codes.size());
      auto n_noise = static_cast<std::size_t>(std::floor(expected_noise));
      if (rng.bernoulli(expected_noise - std::floor(expected_noise))) ++n_noise;
      for (std::size_t c : draw_distinct(spec.vocab_size, n_noise, codes, rng)) codes.insert(c);

      Admission adm;
      adm.timestamp = timestamp;
      for (std::size_t c : codes) adm.codes.insert(synth_code_label(c, spec.vocab_size));
      adm.type = draw_type(a == 0, rng);
      adm.duration_hours = std::exp(rng.normal(std::log(72.0), 0.6));
      patient.record.admissions.push_back(std::move(adm));
      patient.states.push_back(state);
    }
    out.push_back(std::move(patient));
  }
  return out;
}

std::vector<PatientRecord> generate_cohort(const SynthSpec& spec) {
  std::vector<PatientRecord> out;
  for (SynthPatient& p : generate_patients(spec)) out.push_back(std::move(p.record));
  return out;
}

std::string synth_patients_jsonl(const std::vector<PatientRecord>& cohort) {
  using nlohmann::json;
  std::string out;
  for (const PatientRecord& p : cohort) {
    json admissions = json::array();
    for (const Admission& a : p.admissions) {
      admissions.push_back(
          {{"timestamp", a.timestamp},
           {"icd9", std::vector<std::string>(a.codes.begin(), a.codes.end())},
           {"type", a.type ? json(std::string(to_string(*a.type))) : json(nullptr)},
           {"duration_hours", a.duration_hours ? json(*a.duration_hours) : json(nullptr)}});
    }
    out += json{{"patient_id", p.patient_id}, {"admissions", admissions}}.dump();
    out += '\n';
  }
  return out;
}

std::string synth_identity_map_csv(const SynthSpec& spec) {
  std::string out = "icd9,ccs_label,description\n";
  for (std::size_t c = 0; c < spec.vocab_size; ++c) {
    const std::string label = synth_code_label(c, spec.vocab_size);
    out += label + "," + label + ",Synthetic code " + label + "\n";
  }
  return out;
}

std::vector<double> oracle_scores(const SynthSpec& spec, const Admission& previous) {
  std::vector<std::size_t> seen;
  for (const std::string& label : previous.codes) seen.push_back(parse_code(label));
  std::sort(seen.begin(), seen.end());

  std::size_t best_state = 0;
  std::size_t best_overlap = 0;
  for (std::size_t s = 0; s < spec.state_count(); ++s) {
    const auto& codes = spec.codes_per_state[s];
    std::size_t overlap = 0;
    for (std::size_t c : codes) overlap += std::binary_search(seen.begin(), seen.end(), c) ? 1 : 0;
    if (overlap > best_overlap) {
      best_overlap = overlap;
      best_state = s;
    }
  }
  std::vector<double> scores(spec.vocab_size, 0.0);
  for (std::size_t c : spec.codes_per_state[spec.transition_kernel[best_state]]) scores[c] = 1.0;
  return scores;
}

double oracle_recall(const SynthSpec& spec, std::span<const PatientRecord> cohort, std::size_t k) {
  std::vector<double> samples;
  for (const PatientRecord& p : cohort) {
    for (std::size_t i = 0; i + 1 < p.admissions.size(); ++i) {
      const auto scores = oracle_scores(spec, p.admissions[i]);
      std::vector<std::size_t> truth;
      for (const std::string& label : p.admissions[i + 1].codes) truth.push_back(parse_code(label));
      samples.push_back(recall_at_k(scores, truth, std::min(k, spec.vocab_size)));
    }
  }
  if (samples.empty()) return 0.0;
  std::sort(samples.begin(), samples.end());
  double total = 0.0;
  for (double v : samples) total += v;
  return total / static_cast<double>(samples.size());
}

}  // namespace ligdoctor
