// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.
//
// Seeded synthetic cohorts with a planted latent-state chain. Each
// admission emits the code set of its latent state plus uniformly drawn
// noise codes; the next admission's state follows a deterministic kernel.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ligdoctor/ehr_data.h"

namespace ligdoctor {

struct SynthSpec {
  std::size_t n_patients = 1000;
  std::size_t vocab_size = 271;
  double mean_codes_per_admission = 13.0;
  // Admission count is 2 + a geometric number of extra admissions, capped.
  double extra_admission_prob = 0.5;
  std::size_t min_admissions = 2;
  std::size_t max_admissions = 42;
  // Expected fraction of noise codes in an admission, in [0, 1).
  double noise_rate = 0.1;
  std::uint64_t seed = 1;
  std::vector<std::size_t> transition_kernel;          // state -> next state
  std::vector<std::vector<std::size_t>> codes_per_state;  // sorted code ids

  std::size_t state_count() const { return transition_kernel.size(); }
  // Throws InputError on an inconsistent spec.
  void validate() const;
};

// Draws a random kernel (a permutation of the states) and per-state code
// sets whose sizes centre on mean_codes_per_admission * (1 - noise_rate).
SynthSpec make_synth_spec(std::size_t n_patients, std::size_t n_states, double noise_rate,
                          std::uint64_t seed, std::size_t vocab_size = 271,
                          double mean_codes_per_admission = 13.0);

// Zero-padded decimal label of a synthetic code ("007" for 7 of 271).
std::string synth_code_label(std::size_t code, std::size_t vocab_size);

struct SynthPatient {
  PatientRecord record;
  std::vector<std::size_t> states;  // latent state of each admission
};

std::vector<SynthPatient> generate_patients(const SynthSpec& spec);
std::vector<PatientRecord> generate_cohort(const SynthSpec& spec);

// Patient JSON-lines with the synthetic codes in the "icd9" field.
std::string synth_patients_jsonl(const std::vector<PatientRecord>& cohort);
// Identity map: every synthetic code is its own CCS label.
std::string synth_identity_map_csv(const SynthSpec& spec);

// Best achievable mean Recall@k when the kernel and state code sets are
// known: infer the previous admission's state by maximum overlap, then rank
// the successor state's codes first.
double oracle_recall(const SynthSpec& spec, std::span<const PatientRecord> cohort, std::size_t k);

// Ranking the oracle uses for the admission after `previous`.
std::vector<double> oracle_scores(const SynthSpec& spec, const Admission& previous);

}  // namespace ligdoctor
