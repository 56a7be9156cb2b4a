// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#include <benchmark/benchmark.h>

#include "ligdoctor/cells.h"
#include "ligdoctor/ehr_data.h"
#include "ligdoctor/network.h"
#include "ligdoctor/numerics.h"
#include "ligdoctor/synth.h"

namespace ligdoctor {
namespace {

constexpr std::size_t kCodes = 271;
constexpr std::size_t kPatients = 100;

void BM_CellStep(benchmark::State& state) {
  const auto kind = static_cast<CellKind>(state.range(0));
  const auto hid = static_cast<std::size_t>(state.range(1));
  SeededRng rng(1);
  const CellParams p = init_cell(kind, kCodes, hid, rng);
  const Matrix x = init_gaussian(kPatients, kCodes, rng);
  const CellState prev = zero_state(kind, kPatients, hid);
  for (auto _ : state) benchmark::DoNotOptimize(cell_step(p, x, prev));
  state.SetLabel(std::string(to_string(kind)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kPatients));
}

void BM_CellBackward(benchmark::State& state) {
  const auto kind = static_cast<CellKind>(state.range(0));
  const auto hid = static_cast<std::size_t>(state.range(1));
  SeededRng rng(2);
  const CellParams p = init_cell(kind, kCodes, hid, rng);
  const Matrix x = init_gaussian(kPatients, kCodes, rng);
  StepTrace trace;
  const CellState next = cell_step(p, x, zero_state(kind, kPatients, hid), &trace);
  CellState dnext = zero_state(kind, kPatients, hid);
  dnext.parts[0] = init_gaussian(kPatients, hid, rng);
  CellParams grads = zeros_like(p);
  for (auto _ : state) benchmark::DoNotOptimize(cell_backward(p, trace, dnext, grads));
  state.SetLabel(std::string(to_string(kind)));
}

void CellArgs(benchmark::internal::Benchmark* b) {
  for (CellKind kind : kAllCellKinds)
    for (int hid : {64, 271}) b->Args({static_cast<int>(kind), hid});
}

BENCHMARK(BM_CellStep)->Apply(CellArgs);
BENCHMARK(BM_CellBackward)->Apply(CellArgs);

struct NetworkFixture {
  BatchTensor batch;
  LigDoctorParams params;

  explicit NetworkFixture(std::size_t hidden) {
    const auto cohort = generate_cohort(make_synth_spec(kPatients, 40, 0.1, 7));
    const CodeVocabulary vocab = build_vocabulary(cohort);
    batch = build_batch(cohort, vocab, ExtraFeatures{});
    NetworkShape shape;
    shape.code_width = vocab.size();
    shape.hidden = hidden;
    SeededRng rng(3);
    params = init_params(shape, rng);
  }
};

void BM_NetworkForward(benchmark::State& state) {
  const NetworkFixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(batch_loss(forward(f.batch, f.params), f.batch));
}

void BM_NetworkForwardBackward(benchmark::State& state) {
  const NetworkFixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    const ForwardTrace trace = forward(f.batch, f.params);
    benchmark::DoNotOptimize(backward(trace, f.batch, f.params));
  }
}

BENCHMARK(BM_NetworkForward)->Arg(64)->Arg(271)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NetworkForwardBackward)->Arg(64)->Arg(271)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace ligdoctor

BENCHMARK_MAIN();
