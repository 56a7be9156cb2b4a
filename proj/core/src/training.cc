// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#include "ligdoctor/training.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "ligdoctor/error.h"
#include "ligdoctor/evaluation.h"

namespace ligdoctor {

namespace {

using nlohmann::json;

constexpr std::size_t kReportedRecallKs[] = {10, 20, 30};

json extras_to_json(const ExtraFeatures& e) {
  json out = json::array();
  if (e.type) out.push_back("type");
  if (e.duration) out.push_back("duration");
  if (e.interval) out.push_back("interval");
  return out;
}

ExtraFeatures extras_from_json(const json& j) {
  ExtraFeatures e;
  for (const json& item : j) {
    const std::string name = item.get<std::string>();
    if (name == "type") {
      e.type = true;
    } else if (name == "duration") {
      e.duration = true;
    } else if (name == "interval") {
      e.interval = true;
    } else {
      throw InputError("config: unknown extra feature '" + name + "'");
    }
  }
  return e;
}

// Row-weighted loss over a set of batches without dropout or noise.
double evaluate_loss(const std::vector<BatchTensor>& batches, const LigDoctorParams& p) {
  double total = 0.0;
  std::size_t count = 0;
  for (const BatchTensor& b : batches) {
    const std::size_t n = b.valid_count();
    if (n == 0) continue;
    total += batch_loss(forward(b, p), b) * static_cast<double>(n);
    count += n;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

bool all_finite(const LigDoctorParams& p) {
  for (const auto& t : p.tensors())
    if (!t.value->all_finite()) return false;
  return true;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw InputError("config: split_fraction must lie in (0, 1)");
  }
  if (patience_epochs < 1) throw InputError("config: patience_epochs must be >= 1");
  if (!(clip_norm > 0.0)) throw InputError("config: clip_norm must be positive");
  if (!(adadelta_rho > 0.0 && adadelta_rho < 1.0)) {
    throw InputError("config: adadelta_rho must lie in (0, 1)");
  }
  if (!(adadelta_eps > 0.0)) throw InputError("config: adadelta_eps must be positive");
  if (l2_coeff < 0.0) throw InputError("config: l2_coeff must be non-negative");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw InputError("config: dropout_rate must lie in [0, 1)");
  }
  if (input_noise_std < 0.0) throw InputError("config: input_noise_std must be non-negative");
  if (max_epochs < 1) throw InputError("config: max_epochs must be >= 1");
  if (layers < 1) throw InputError("config: layers must be >= 1");
  if (unsupervised_pretraining) {
    throw InputError("config: unsupervised_pretraining is not supported");
  }
}

TrainConfig config_from_json(std::string_view text, TrainConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw InputError("config: expected a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "split_fraction") c.split_fraction = value.get<double>();
      else if (key == "patience_epochs") c.patience_epochs = value.get<std::size_t>();
      else if (key == "adadelta_rho") c.adadelta_rho = value.get<double>();
      else if (key == "adadelta_eps") c.adadelta_eps = value.get<double>();
      else if (key == "clip_norm") c.clip_norm = value.get<double>();
      else if (key == "l2_coeff") c.l2_coeff = value.get<double>();
      else if (key == "dropout_rate") c.dropout_rate = value.get<double>();
      else if (key == "input_noise_std") c.input_noise_std = value.get<double>();
      else if (key == "max_epochs") c.max_epochs = value.get<std::size_t>();
      else if (key == "hidden_size") c.hidden_size = value.get<std::size_t>();
      else if (key == "cell_kind") c.cell_kind = parse_cell_kind(value.get<std::string>());
      else if (key == "layers") c.layers = value.get<std::size_t>();
      else if (key == "bidirectional") c.bidirectional = value.get<bool>();
      else if (key == "extra_features") c.extra_features = extras_from_json(value);
      else if (key == "embedding_dim") c.embedding_dim = value.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "unsupervised_pretraining") c.unsupervised_pretraining = value.get<bool>();
      else throw InputError("config: unknown field '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  return c;
}

std::string config_to_json(const TrainConfig& c) {
  const json j = {
      {"seed", c.seed},
      {"split_fraction", c.split_fraction},
      {"patience_epochs", c.patience_epochs},
      {"adadelta_rho", c.adadelta_rho},
      {"adadelta_eps", c.adadelta_eps},
      {"clip_norm", c.clip_norm},
      {"l2_coeff", c.l2_coeff},
      {"dropout_rate", c.dropout_rate},
      {"input_noise_std", c.input_noise_std},
      {"max_epochs", c.max_epochs},
      {"hidden_size", c.hidden_size},
      {"cell_kind", std::string(to_string(c.cell_kind))},
      {"layers", c.layers},
      {"bidirectional", c.bidirectional},
      {"extra_features", extras_to_json(c.extra_features)},
      {"embedding_dim", c.embedding_dim},
      {"batch_size", c.batch_size},
      {"unsupervised_pretraining", c.unsupervised_pretraining},
  };
  return j.dump(2) + "\n";
}

std::string TrainReport::to_json(bool include_wall_time) const {
  json rows = json::array();
  for (const EpochRecord& e : epochs) {
    rows.push_back({{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"validation_loss", e.validation_loss},
                    {"improved", e.improved}});
  }
  auto recall_json = [](const std::map<std::size_t, double>& r) {
    json out = json::object();
    for (const auto& [k, v] : r) out["recall@" + std::to_string(k)] = v;
    return out;
  };
  json j = {{"epochs", rows},
            {"iterations", iterations},
            {"best_epoch", best_epoch},
            {"best_validation_loss", best_validation_loss},
            {"stop_reason", stop_reason},
            {"train_patients", train_patients},
            {"test_patients", test_patients},
            {"vocabulary_size", vocabulary_size},
            {"recall", recall_json(recall)},
            {"recall_prefix", recall_json(recall_prefix)}};
  if (include_wall_time) j["wall_time_seconds"] = wall_time_seconds;
  return j.dump(2) + "\n";
}

PatientSplit split_patients(std::size_t count, double fraction, std::uint64_t seed) {
  if (count < 2) throw InputError("cannot split fewer than two patients");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  SeededRng rng(seed);
  rng.shuffle(order);
  auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(count)));
  n_train = std::clamp<std::size_t>(n_train, 1, count - 1);
  PatientSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return split;
}

double gradient_norm(const LigDoctorParams& grads) {
  double acc = 0.0;
  for (const auto& t : grads.tensors()) acc += sum_squares(*t.value);
  return std::sqrt(acc);
}

double clip_gradients(LigDoctorParams& grads, double clip_norm) {
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_gradients: clip_norm must be > 0");
  const double norm = gradient_norm(grads);
  if (norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (auto& t : grads.tensors()) *t.value *= scale;
  }
  return norm;
}

double l2_penalty(const LigDoctorParams& p, double l2_coeff) {
  double acc = 0.0;
  for (const auto& t : p.tensors())
    if (t.is_weight) acc += sum_squares(*t.value);
  return l2_coeff * acc;
}

void add_l2_gradient(const LigDoctorParams& p, double l2_coeff, LigDoctorParams& grads) {
  if (l2_coeff == 0.0) return;
  const auto src = p.tensors();
  auto dst = grads.tensors();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!src[i].is_weight) continue;
    *dst[i].value += *src[i].value * (2.0 * l2_coeff);
  }
}

void adadelta_update(std::span<double> params, std::span<const double> grads,
                     AdadeltaState& state, double rho, double eps) {
  if (grads.size() != params.size() || state.grad_acc.size() != params.size() ||
      state.step_acc.size() != params.size()) {
    throw ShapeError("adadelta_update: state does not match the parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.grad_acc[i] = rho * state.grad_acc[i] + (1.0 - rho) * g * g;
    const double step = -std::sqrt(state.step_acc[i] + eps) / std::sqrt(state.grad_acc[i] + eps) * g;
    state.step_acc[i] = rho * state.step_acc[i] + (1.0 - rho) * step * step;
    params[i] += step;
  }
}

void adadelta_update(LigDoctorParams& params, const LigDoctorParams& grads, AdadeltaState& state,
                     double rho, double eps) {
  std::vector<double> flat = params.flatten();
  const std::vector<double> g = grads.flatten();
  adadelta_update(flat, g, state, rho, eps);
  params.assign_flat(flat);
}

void add_input_noise(BatchTensor& batch, double stddev, SeededRng& rng) {
  if (stddev <= 0.0) return;
  for (std::size_t t = 0; t < batch.steps(); ++t) {
    for (std::size_t h = 0; h < batch.patients(); ++h) {
      if (batch.mask(t, h) == 0.0) continue;
      for (std::size_t j = 0; j < batch.code_width; ++j) batch.x(t, h, j) += rng.normal(0.0, stddev);
    }
  }
}

std::vector<BatchTensor> make_batches(std::span<const PatientRecord> patients,
                                      const CodeVocabulary& vocab, const ExtraFeatures& extras,
                                      const FeatureNormalization& normalization,
                                      std::size_t batch_size) {
  std::vector<BatchTensor> out;
  if (patients.empty()) return out;
  if (batch_size == 0 || batch_size >= patients.size()) {
    out.push_back(build_batch(patients, vocab, extras, normalization));
    return out;
  }
  std::vector<PatientRecord> ordered(patients.begin(), patients.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const PatientRecord& a, const PatientRecord& b) {
                     return a.admissions.size() < b.admissions.size();
                   });
  for (std::size_t start = 0; start < ordered.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, ordered.size() - start);
    out.push_back(build_batch(std::span(ordered).subspan(start, n), vocab, extras, normalization));
  }
  return out;
}

TrainResult train(const std::vector<PatientRecord>& cohort, const TrainConfig& config,
                  const std::map<std::string, std::string>& descriptions) {
  config.validate();
  if (cohort.size() < 2) throw InputError("training needs at least two patients");
  const auto started = std::chrono::steady_clock::now();

  const CodeVocabulary vocab = build_vocabulary(cohort);
  const PatientSplit split = split_patients(cohort.size(), config.split_fraction, config.seed);
  std::vector<PatientRecord> train_set, test_set;
  for (std::size_t i : split.train) train_set.push_back(cohort[i]);
  for (std::size_t i : split.test) test_set.push_back(cohort[i]);

  const FeatureNormalization norm = compute_normalization(train_set);
  const auto train_batches =
      make_batches(train_set, vocab, config.extra_features, norm, config.batch_size);
  const auto test_batches =
      make_batches(test_set, vocab, config.extra_features, norm, config.batch_size);

  NetworkShape shape;
  shape.code_width = vocab.size();
  shape.extras = config.extra_features;
  shape.hidden = config.hidden_size == 0 ? vocab.size() : config.hidden_size;
  shape.layers = config.layers;
  shape.cell = config.cell_kind;
  shape.bidirectional = config.bidirectional;
  shape.embedding_dim = config.embedding_dim;

  SeededRng init_rng(derive_seed(config.seed, 1));
  SeededRng noise_rng(derive_seed(config.seed, 2));
  SeededRng order_rng(derive_seed(config.seed, 3));
  LigDoctorParams params = init_params(shape, init_rng);
  AdadeltaState optimizer(params.scalar_count());

  TrainReport report;
  report.train_patients = train_set.size();
  report.test_patients = test_set.size();
  report.vocabulary_size = vocab.size();
  LigDoctorParams best = params;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  ForwardOptions fwd_options;
  fwd_options.dropout_rate = config.dropout_rate;
  fwd_options.rng = &noise_rng;

  std::vector<std::size_t> order(train_batches.size());
  std::iota(order.begin(), order.end(), 0);
  report.stop_reason = "max_epochs";
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double train_total = 0.0;
    std::size_t train_count = 0;
    for (std::size_t b : order) {
      const BatchTensor* batch = &train_batches[b];
      BatchTensor noisy;
      if (config.input_noise_std > 0.0) {
        noisy = *batch;
        add_input_noise(noisy, config.input_noise_std, noise_rng);
        batch = &noisy;
      }
      const std::size_t n = batch->valid_count();
      if (n == 0) continue;
      const ForwardTrace trace = forward(*batch, params, fwd_options);
      const double loss = batch_loss(trace, *batch);
      if (!std::isfinite(loss)) {
        throw DivergenceError("training diverged: non-finite loss at epoch " +
                              std::to_string(epoch));
      }
      LigDoctorParams grads = backward(trace, *batch, params);
      add_l2_gradient(params, config.l2_coeff, grads);
      const double norm_before = clip_gradients(grads, config.clip_norm);
      if (!std::isfinite(norm_before)) {
        throw DivergenceError("training diverged: non-finite gradient at epoch " +
                              std::to_string(epoch));
      }
      adadelta_update(params, grads, optimizer, config.adadelta_rho, config.adadelta_eps);
      train_total += loss * static_cast<double>(n);
      train_count += n;
    }
    if (!all_finite(params)) {
      throw DivergenceError("training diverged: non-finite parameters at epoch " +
                            std::to_string(epoch));
    }

    double validation = evaluate_loss(test_batches, params);
    if (config.validation_hook) validation = config.validation_hook(epoch, validation);
    if (!std::isfinite(validation)) {
      throw DivergenceError("training diverged: non-finite validation loss at epoch " +
                            std::to_string(epoch));
    }
    EpochRecord record{epoch, train_count ? train_total / static_cast<double>(train_count) : 0.0,
                       validation, validation < best_loss};
    report.epochs.push_back(record);
    report.iterations = epoch;
    if (record.improved) {
      best_loss = validation;
      best = params;
      report.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience_epochs) {
      report.stop_reason = "patience";
      break;
    }
  }
  report.best_validation_loss = best_loss;

  std::vector<std::size_t> ks;
  for (std::size_t k : kReportedRecallKs) ks.push_back(std::min(k, vocab.size()));
  for (const RecallResult& r : evaluate_model(best, test_set, vocab, norm, ks,
                                              EvalProtocol::kFullSequence)) {
    report.recall[r.k] = r.mean;
  }
  for (const RecallResult& r :
       evaluate_model(best, test_set, vocab, norm, ks, EvalProtocol::kPrefix)) {
    report.recall_prefix[r.k] = r.mean;
  }
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  TrainResult result;
  result.model.params = std::move(best);
  result.model.vocab = vocab;
  for (const std::string& label : vocab.labels()) {
    auto it = descriptions.find(label);
    if (it != descriptions.end()) result.model.descriptions.emplace(label, it->second);
  }
  result.model.normalization = norm;
  result.report = std::move(report);
  return result;
}

}  // namespace ligdoctor
