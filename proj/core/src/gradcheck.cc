// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#include "ligdoctor/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "ligdoctor/network.h"

namespace ligdoctor {

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckResult check_network_gradients(const GradCheckOptions& o) {
  SeededRng rng(o.seed);
  std::vector<std::string> labels;
  for (std::size_t c = 0; c < o.code_width; ++c) labels.push_back(std::to_string(c));
  std::sort(labels.begin(), labels.end());
  const CodeVocabulary vocab(labels);

  std::vector<PatientRecord> patients;
  for (std::size_t h = 0; h < o.patients; ++h) {
    const std::size_t admissions = h == 0 ? o.steps + 1 : std::max<std::size_t>(2, o.steps + 1 - h);
    PatientRecord p{"p" + std::to_string(h), {}};
    std::int64_t ts = 1000000;
    for (std::size_t a = 0; a < admissions; ++a) {
      Admission adm;
      ts += 3600 * static_cast<std::int64_t>(1 + rng.uniform_index(500));
      adm.timestamp = ts;
      const std::size_t n_codes = 1 + rng.uniform_index(std::min<std::size_t>(3, o.code_width));
      while (adm.codes.size() < n_codes) adm.codes.insert(labels[rng.uniform_index(o.code_width)]);
      adm.type = static_cast<AdmissionType>(rng.uniform_index(kAdmissionTypeCount));
      adm.duration_hours = 1.0 + 100.0 * rng.uniform();
      p.admissions.push_back(std::move(adm));
    }
    patients.push_back(std::move(p));
  }
  const BatchTensor batch = build_batch(patients, vocab, o.extras);

  NetworkShape shape;
  shape.code_width = o.code_width;
  shape.extras = o.extras;
  shape.hidden = o.hidden;
  shape.layers = o.layers;
  shape.cell = o.cell;
  shape.bidirectional = o.bidirectional;
  shape.embedding_dim = o.embedding_dim;
  LigDoctorParams params = init_params(shape, rng);
  // Move away from identity/zero initial values so every term is exercised.
  std::vector<double> theta = params.flatten();
  for (double& v : theta) v += rng.normal(0.0, 0.3);
  params.assign_flat(theta);

  LigDoctorParams grads = backward(forward(batch, params), batch, params);
  std::vector<double> analytic = grads.flatten();
  if (o.corrupt_analytic && !analytic.empty()) analytic[0] = analytic[0] * 1.5 + 1e-3;

  LigDoctorParams probe = params;
  const auto numeric = finite_diff_grad(
      [&](std::span<const double> values) {
        probe.assign_flat(values);
        return batch_loss(forward(batch, probe), batch);
      },
      theta, o.eps);

  GradCheckResult result;
  result.checked = theta.size();
  std::size_t offset = 0;
  for (const auto& t : params.tensors()) {
    for (std::size_t i = 0; i < t.value->size(); ++i, ++offset) {
      const double err = relative_error(analytic[offset], numeric[offset]);
      if (err > result.max_relative_error || result.worst_parameter.empty()) {
        result.max_relative_error = err;
        result.worst_parameter = t.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace ligdoctor
