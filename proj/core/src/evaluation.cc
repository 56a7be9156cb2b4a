// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#include "ligdoctor/evaluation.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "ligdoctor/error.h"

namespace ligdoctor {

namespace {

using nlohmann::json;

// Order-independent mean: the samples are summed in sorted order.
double stable_mean(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

std::vector<std::size_t> target_indices(std::span<const double> multi_hot) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < multi_hot.size(); ++j)
    if (multi_hot[j] != 0.0) out.push_back(j);
  return out;
}

std::vector<RecallResult> finish(std::span<const std::size_t> ks,
                                 std::vector<std::vector<double>> samples) {
  std::vector<RecallResult> out;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    RecallResult r;
    r.k = ks[i];
    r.mean = stable_mean(samples[i]);
    r.samples = std::move(samples[i]);
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string extras_label(const ExtraFeatures& e) {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(e.type, "type");
  add(e.duration, "duration");
  add(e.interval, "interval");
  return out.empty() ? "none" : out;
}

struct JobOutcome {
  bool ok = false;
  std::string failure;
  std::map<std::size_t, double> recall;
  double iterations = 0.0;
  double time_seconds = 0.0;
};

JobOutcome run_job(const std::vector<PatientRecord>& cohort, const CodeVocabulary& vocab,
                   const GridRow& row, std::span<const std::size_t> ks, std::uint64_t seed) {
  JobOutcome out;
  const auto started = std::chrono::steady_clock::now();
  try {
    const PatientSplit split = split_patients(cohort.size(), row.config.split_fraction, seed);
    std::vector<PatientRecord> test_set;
    for (std::size_t i : split.test) test_set.push_back(cohort[i]);
    std::vector<RecallResult> results;
    if (row.random_baseline) {
      results = evaluate_random_baseline(test_set, vocab, ks, derive_seed(seed, 0x52414e44));
      out.iterations = 1.0;
    } else {
      TrainConfig config = row.config;
      config.seed = seed;
      const TrainResult trained = train(cohort, config);
      results = evaluate_model(trained.model.params, test_set, trained.model.vocab,
                               trained.model.normalization, ks);
      out.iterations = static_cast<double>(trained.report.iterations);
    }
    for (const RecallResult& r : results) out.recall[r.k] = r.mean;
    out.ok = true;
  } catch (const std::exception& e) {
    out.failure = e.what();
  }
  out.time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

}  // namespace

double recall_at_k(std::span<const double> yhat, std::span<const std::size_t> target,
                   std::size_t k) {
  if (target.empty()) throw std::invalid_argument("recall_at_k: empty target set");
  std::vector<std::size_t> truth(target.begin(), target.end());
  std::sort(truth.begin(), truth.end());
  truth.erase(std::unique(truth.begin(), truth.end()), truth.end());
  if (truth.back() >= yhat.size()) throw std::out_of_range("recall_at_k: target index out of range");
  const auto top = top_k_indices(yhat, k);
  std::size_t hits = 0;
  for (std::size_t idx : top) hits += std::binary_search(truth.begin(), truth.end(), idx) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::string_view to_string(EvalProtocol protocol) {
  return protocol == EvalProtocol::kFullSequence ? "full_sequence" : "prefix";
}

std::vector<RecallResult> evaluate_model(const LigDoctorParams& params,
                                         std::span<const PatientRecord> cohort,
                                         const CodeVocabulary& vocab,
                                         const FeatureNormalization& normalization,
                                         std::span<const std::size_t> ks, EvalProtocol protocol,
                                         std::size_t batch_size) {
  std::vector<std::vector<double>> samples(ks.size());
  auto score = [&](const Matrix& yhat_row_source, std::size_t row, std::span<const double> y) {
    const auto truth = target_indices(y);
    if (truth.empty()) return;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      samples[i].push_back(recall_at_k(yhat_row_source.row(row), truth, ks[i]));
    }
  };

  std::vector<PatientRecord> records;
  if (protocol == EvalProtocol::kFullSequence) {
    records.assign(cohort.begin(), cohort.end());
  } else {
    for (const PatientRecord& p : cohort) {
      for (std::size_t i = 2; i <= p.admissions.size(); ++i) {
        records.push_back(PatientRecord{
            p.patient_id, {p.admissions.begin(), p.admissions.begin() + static_cast<std::ptrdiff_t>(i)}});
      }
    }
  }
  if (batch_size == 0) batch_size = records.size();
  for (std::size_t start = 0; start < records.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, records.size() - start);
    const BatchTensor batch = build_batch(std::span(records).subspan(start, n), vocab,
                                          params.shape.extras, normalization);
    const ForwardTrace trace = forward(batch, params);
    for (std::size_t h = 0; h < n; ++h) {
      if (protocol == EvalProtocol::kFullSequence) {
        for (std::size_t t = 0; t < batch.steps(); ++t) {
          if (batch.mask(t, h) != 0.0) score(trace.yhat[t], h, batch.targets.cell(t, h));
        }
      } else {
        const std::size_t t = batch.last_step(h);
        score(trace.yhat[t], h, batch.targets.cell(t, h));
      }
    }
  }
  return finish(ks, std::move(samples));
}

std::vector<RecallResult> evaluate_random_baseline(std::span<const PatientRecord> cohort,
                                                   const CodeVocabulary& vocab,
                                                   std::span<const std::size_t> ks,
                                                   std::uint64_t seed) {
  SeededRng rng(seed);
  std::vector<std::vector<double>> samples(ks.size());
  std::vector<double> yhat(vocab.size());
  for (const PatientRecord& p : cohort) {
    for (std::size_t i = 0; i + 1 < p.admissions.size(); ++i) {
      const auto truth = target_indices(encode_codes(p.admissions[i + 1].codes, vocab));
      for (double& v : yhat) v = rng.uniform();
      if (truth.empty()) continue;
      for (std::size_t j = 0; j < ks.size(); ++j) {
        samples[j].push_back(recall_at_k(yhat, truth, ks[j]));
      }
    }
  }
  return finish(ks, std::move(samples));
}

GridSpec grid_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("grid: ") + e.what());
  }
  GridSpec spec;
  TrainConfig base;
  if (j.contains("base")) base = config_from_json(j["base"].dump());
  if (j.contains("ks")) spec.ks = j["ks"].get<std::vector<std::size_t>>();
  if (!j.contains("rows") || !j["rows"].is_array() || j["rows"].empty()) {
    throw InputError("grid: 'rows' must be a non-empty array");
  }
  for (const json& r : j["rows"]) {
    GridRow row;
    json overrides = r;
    if (!overrides.contains("name")) throw InputError("grid: every row needs a 'name'");
    row.name = overrides["name"].get<std::string>();
    overrides.erase("name");
    if (overrides.contains("random")) {
      row.random_baseline = overrides["random"].get<bool>();
      overrides.erase("random");
    }
    row.config = config_from_json(overrides.dump(), base);
    spec.rows.push_back(std::move(row));
  }
  for (std::size_t k : spec.ks)
    if (k == 0) throw InputError("grid: k must be positive");
  return spec;
}

ComparisonGrid run_comparison(const std::vector<PatientRecord>& cohort, const GridSpec& spec,
                              std::span<const std::uint64_t> seeds, std::size_t jobs) {
  if (spec.rows.empty()) throw InputError("comparison grid has no rows");
  if (seeds.empty()) throw InputError("comparison needs at least one seed");
  const CodeVocabulary vocab = build_vocabulary(cohort);
  std::vector<std::size_t> ks;
  for (std::size_t k : spec.ks) {
    k = std::min(k, vocab.size());
    if (std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
  }

  const std::size_t total = spec.rows.size() * seeds.size();
  std::vector<JobOutcome> outcomes(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job = next++; job < total; job = next++) {
      const std::size_t row = job / seeds.size();
      outcomes[job] = run_job(cohort, vocab, spec.rows[row], ks, seeds[job % seeds.size()]);
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, total);
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  ComparisonGrid grid;
  grid.ks = ks;
  for (std::size_t r = 0; r < spec.rows.size(); ++r) {
    GridResult result;
    result.name = spec.rows[r].name;
    result.random_baseline = spec.rows[r].random_baseline;
    result.config = spec.rows[r].config;
    result.ok = true;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const JobOutcome& o = outcomes[r * seeds.size() + s];
      if (!o.ok) {
        result.ok = false;
        if (result.failure.empty()) result.failure = o.failure;
        continue;
      }
      ++result.seeds_succeeded;
      for (const auto& [k, v] : o.recall) result.recall[k] += v;
      result.iterations += o.iterations;
      result.time_seconds += o.time_seconds;
    }
    if (result.ok) {
      const double n = static_cast<double>(result.seeds_succeeded);
      for (auto& [k, v] : result.recall) v /= n;
      result.iterations /= n;
      result.time_seconds /= n;
    } else {
      result.recall.clear();
      result.iterations = 0.0;
      result.time_seconds = 0.0;
    }
    grid.rows.push_back(std::move(result));
  }
  return grid;
}

std::string ComparisonGrid::to_csv(bool include_time) const {
  std::ostringstream out;
  out << "name,cell_kind,layers,hidden_size,bidirectional,extra_features,embedding_dim";
  for (std::size_t k : ks) out << ",recall@" << k;
  out << ",iterations";
  if (include_time) out << ",time_s";
  out << ",status\n";
  for (const GridResult& r : rows) {
    const TrainConfig& c = r.config;
    out << r.name << ',';
    if (r.random_baseline) {
      out << "random,,,,,";
    } else {
      out << to_string(c.cell_kind) << ',' << c.layers << ',' << c.hidden_size << ','
          << (c.bidirectional ? "true" : "false") << ',' << extras_label(c.extra_features) << ','
          << c.embedding_dim;
    }
    for (std::size_t k : ks) {
      out << ',';
      if (r.ok) out << format_number(r.recall.at(k));
    }
    out << ',';
    if (r.ok) out << format_number(r.iterations);
    if (include_time) {
      out << ',';
      if (r.ok) out << format_number(r.time_seconds);
    }
    out << ',' << (r.ok ? "ok" : "failed") << '\n';
  }
  return out.str();
}

std::string ComparisonGrid::to_json(bool include_time) const {
  json rows_json = json::array();
  for (const GridResult& r : rows) {
    json row = {{"name", r.name}, {"random_baseline", r.random_baseline}, {"ok", r.ok}};
    if (!r.random_baseline) {
      row["cell_kind"] = std::string(to_string(r.config.cell_kind));
      row["layers"] = r.config.layers;
      row["hidden_size"] = r.config.hidden_size;
      row["bidirectional"] = r.config.bidirectional;
      row["extra_features"] = extras_label(r.config.extra_features);
      row["embedding_dim"] = r.config.embedding_dim;
    }
    if (r.ok) {
      for (std::size_t k : ks) row["recall@" + std::to_string(k)] = r.recall.at(k);
      row["iterations"] = r.iterations;
      if (include_time) row["time_s"] = r.time_seconds;
    } else {
      row["failure"] = r.failure;
    }
    rows_json.push_back(std::move(row));
  }
  return json{{"ks", ks}, {"rows", rows_json}}.dump(2) + "\n";
}

}  // namespace ligdoctor
