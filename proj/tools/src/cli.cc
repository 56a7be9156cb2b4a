// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#include "ligdoctor_cli/cli.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ligdoctor/checkpoint.h"
#include "ligdoctor/error.h"
#include "ligdoctor/evaluation.h"
#include "ligdoctor/gradcheck.h"
#include "ligdoctor/io.h"
#include "ligdoctor/synth.h"
#include "ligdoctor/training.h"

namespace ligdoctor::cli {

namespace {

using nlohmann::json;

class Logger {
 public:
  Logger(std::ostream& err, const bool& quiet) : err_(err), quiet_(quiet) {}
  template <typename... Args>
  void info(const Args&... args) const {
    if (quiet_) return;
    err_ << "[ligdoctor] ";
    (err_ << ... << args);
    err_ << '\n';
  }

 private:
  std::ostream& err_;
  const bool& quiet_;
};

// Relative input paths are looked up under $LIGDOCTOR_DATA_DIR when it is set.
std::string input_path(const std::string& path) {
  const char* dir = std::getenv(kDataDirEnv);
  if (path.empty() || !dir || !*dir) return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(dir) / p).string();
}

void require_file(const std::string& path, const char* what) {
  if (!std::filesystem::is_regular_file(path)) {
    throw InputError(std::string(what) + " '" + path + "' does not exist");
  }
}

// Explicit cut-offs must lie in [1, |D|]; defaults are clamped to |D|.
std::vector<std::size_t> parse_ks(const std::vector<std::size_t>& ks, std::size_t vocab,
                                  bool explicit_ks) {
  std::vector<std::size_t> out;
  for (std::size_t k : ks) {
    if (!explicit_ks) k = std::min(k, vocab);
    if (std::find(out.begin(), out.end(), k) != out.end()) continue;
    if (k == 0 || k > vocab) {
      throw InputError("k=" + std::to_string(k) + " is outside [1, " + std::to_string(vocab) + "]");
    }
    out.push_back(k);
  }
  return out;
}

json recall_json(const std::vector<RecallResult>& results) {
  json j = json::object();
  for (const RecallResult& r : results) j["recall@" + std::to_string(r.k)] = r.mean;
  return j;
}

struct PrepareArgs {
  std::string input, ccs, output, report;
};

int cmd_prepare(const PrepareArgs& a, const Logger& log) {
  const std::string input = input_path(a.input);
  const std::string ccs = input_path(a.ccs);
  require_file(input, "input file");
  require_file(ccs, "CCS map");
  std::vector<std::string> warnings;
  const CcsMap map = load_ccs_map(ccs, &warnings);
  for (const auto& w : warnings) log.info("warning: ", w);
  const auto raw = read_patients_jsonl(input);

  MappingReport mapping;
  std::vector<PatientRecord> mapped;
  mapped.reserve(raw.size());
  for (const RawPatient& p : raw) mapped.push_back(map_icd_to_ccs(p, map, &mapping));
  FilterReport filter;
  const auto cohort = filter_cohort(mapped, &filter);

  write_file_atomic(a.output, cohort_to_jsonl(cohort));
  if (!a.report.empty()) {
    json report = json::parse(filter.to_json());
    report["mapping"] = {{"mapped_codes", mapping.mapped_codes},
                         {"unknown_codes", mapping.unknown_codes},
                         {"unknown_by_code", mapping.unknown_by_code}};
    write_file_atomic(a.report, report.dump(2) + "\n");
  }
  log.info("prepared ", filter.kept_patients, " of ", filter.input_patients, " patients, ",
           filter.kept_admissions, " admissions");
  return kExitOk;
}

struct SynthArgs {
  std::size_t patients = 1000;
  std::size_t states = 40;
  std::size_t vocab = 271;
  double mean_codes = 13.0;
  double noise = 0.1;
  std::uint64_t seed = 1;
  std::string output, map;
};

int cmd_synth(const SynthArgs& a, const Logger& log) {
  const SynthSpec spec =
      make_synth_spec(a.patients, a.states, a.noise, a.seed, a.vocab, a.mean_codes);
  const auto cohort = generate_cohort(spec);
  write_file_atomic(a.output, synth_patients_jsonl(cohort));
  if (!a.map.empty()) write_file_atomic(a.map, synth_identity_map_csv(spec));
  log.info("wrote ", cohort.size(), " synthetic patients");
  return kExitOk;
}

struct TrainArgs {
  std::string cohort, config, model, report, ccs;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_epochs, hidden, batch_size, layers;
  std::optional<std::string> cell;
  bool timing = false;
};

int cmd_train(const TrainArgs& a, const Logger& log) {
  const std::string cohort_path = input_path(a.cohort);
  require_file(cohort_path, "cohort");
  TrainConfig config;
  if (!a.config.empty()) {
    const std::string config_path = input_path(a.config);
    require_file(config_path, "config");
    config = config_from_json(read_file(config_path));
  }
  if (a.seed) config.seed = *a.seed;
  if (a.max_epochs) config.max_epochs = *a.max_epochs;
  if (a.hidden) config.hidden_size = *a.hidden;
  if (a.batch_size) config.batch_size = *a.batch_size;
  if (a.layers) config.layers = *a.layers;
  if (a.cell) config.cell_kind = parse_cell_kind(*a.cell);

  std::map<std::string, std::string> descriptions;
  if (!a.ccs.empty()) descriptions = load_ccs_map(input_path(a.ccs)).descriptions;

  const auto cohort = read_cohort_jsonl(cohort_path);
  log.info("training ", to_string(config.cell_kind), " on ", cohort.size(), " patients");
  const TrainResult result = train(cohort, config, descriptions);
  save_model(a.model, result.model);
  if (!a.report.empty()) write_file_atomic(a.report, result.report.to_json(a.timing));
  log.info("stopped after ", result.report.iterations, " epochs (", result.report.stop_reason,
           "), best epoch ", result.report.best_epoch);
  return kExitOk;
}

struct EvaluateArgs {
  std::string model, cohort, report;
  std::vector<std::size_t> ks = {10, 20, 30};
  std::string protocol = "full";
  bool ks_given = false;
  std::optional<std::uint64_t> split_seed;
  double split_fraction = 0.9;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, const Logger& log) {
  const std::string model_path = input_path(a.model);
  const std::string cohort_path = input_path(a.cohort);
  require_file(model_path, "model");
  require_file(cohort_path, "cohort");
  const Model model = load_model(model_path);
  auto cohort = read_cohort_jsonl(cohort_path);
  if (a.split_seed) {
    const auto split = split_patients(cohort.size(), a.split_fraction, *a.split_seed);
    std::vector<PatientRecord> held_out;
    for (std::size_t i : split.test) held_out.push_back(cohort[i]);
    cohort = std::move(held_out);
  }
  EvalProtocol protocol;
  if (a.protocol == "full") protocol = EvalProtocol::kFullSequence;
  else if (a.protocol == "prefix") protocol = EvalProtocol::kPrefix;
  else throw InputError("unknown protocol '" + a.protocol + "' (expected full or prefix)");

  const auto ks = parse_ks(a.ks, model.vocab.size(), a.ks_given);
  const auto results = evaluate_model(model.params, cohort, model.vocab, model.normalization, ks,
                                      protocol);
  json j = recall_json(results);
  j["protocol"] = std::string(to_string(protocol));
  j["patients"] = cohort.size();
  j["transitions"] = results.empty() ? 0 : results.front().samples.size();
  const std::string text = j.dump(2) + "\n";
  if (a.report.empty()) out << text;
  else write_file_atomic(a.report, text);
  log.info("evaluated ", cohort.size(), " patients");
  return kExitOk;
}

struct PredictArgs {
  std::string model, history, ccs;
  std::size_t k = 30;
  bool k_given = false;
};

int cmd_predict(const PredictArgs& a, std::ostream& out, const Logger& log) {
  const std::string model_path = input_path(a.model);
  const std::string history_path = input_path(a.history);
  require_file(model_path, "model");
  require_file(history_path, "history");
  const Model model = load_model(model_path);
  const std::size_t k = parse_ks({a.k}, model.vocab.size(), a.k_given).front();

  std::optional<CcsMap> map;
  if (!a.ccs.empty()) {
    const std::string ccs_path = input_path(a.ccs);
    require_file(ccs_path, "CCS map");
    map = load_ccs_map(ccs_path);
  }

  for (const RawPatient& raw : read_patients_jsonl(history_path)) {
    PatientRecord history;
    if (map) {
      // With a map the history holds ICD-9 codes; an unmapped code is treated
      // like a label outside the model vocabulary.
      RawPatient mapped = raw;
      for (RawAdmission& adm : mapped.admissions) {
        for (std::string& code : adm.codes) {
          const std::string* label = map->lookup(code);
          if (!label) throw VocabularyError("ICD-9 code '" + code + "' is not in the CCS map");
          code = *label;
        }
      }
      history = from_prepared(mapped);
    } else {
      history = from_prepared(raw);
    }
    if (history.admissions.empty()) {
      throw InputError("patient '" + raw.patient_id + "' has no admissions");
    }
    const auto ranked = predict_topk(model.params, history, model.vocab, model.normalization, k);
    json list = json::array();
    for (const ScoredCode& s : ranked) {
      std::string description = model.describe(s.index);
      if (map && map->descriptions.count(s.label)) description = map->descriptions.at(s.label);
      list.push_back({{"code", s.label}, {"description", description},
                      {"probability", s.probability}});
    }
    out << list.dump() << '\n';
  }
  log.info("ranked ", k, " codes per patient");
  return kExitOk;
}

struct GradCheckArgs {
  std::string dims = "small";
  std::optional<std::size_t> steps, hidden, codes, patients;
  std::vector<std::string> cells;
  std::size_t layers = 1;
  bool unidirectional = false;
  bool corrupt = false;
  double tolerance = 1e-4;
};

int cmd_gradcheck(const GradCheckArgs& a, std::ostream& out) {
  if (a.dims != "small") throw InputError("unknown --dims '" + a.dims + "' (expected small)");
  std::vector<CellKind> kinds;
  if (a.cells.empty()) kinds.assign(std::begin(kAllCellKinds), std::end(kAllCellKinds));
  for (const auto& name : a.cells) kinds.push_back(parse_cell_kind(name));

  double worst = 0.0;
  for (CellKind kind : kinds) {
    GradCheckOptions opt;
    opt.cell = kind;
    if (a.steps) opt.steps = *a.steps;
    if (a.hidden) opt.hidden = *a.hidden;
    if (a.codes) opt.code_width = *a.codes;
    if (a.patients) opt.patients = *a.patients;
    opt.layers = a.layers;
    opt.bidirectional = !a.unidirectional;
    opt.corrupt_analytic = a.corrupt;
    const GradCheckResult r = check_network_gradients(opt);
    worst = std::max(worst, r.max_relative_error);
    out << to_string(kind) << " max_relative_error=" << r.max_relative_error
        << " worst=" << r.worst_parameter << " checked=" << r.checked << '\n';
  }
  const bool pass = worst <= a.tolerance;
  out << (pass ? "PASS" : "FAIL") << " max_relative_error=" << worst
      << " tolerance=" << a.tolerance << '\n';
  return pass ? kExitOk : kExitGradCheck;
}

struct CompareArgs {
  std::string grid, cohort, csv, json_out;
  std::size_t seeds = 3;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  bool timing = false;
};

int cmd_compare(const CompareArgs& a, std::ostream& out, const Logger& log) {
  const std::string grid_path = input_path(a.grid);
  const std::string cohort_path = input_path(a.cohort);
  require_file(grid_path, "grid");
  require_file(cohort_path, "cohort");
  if (a.seeds == 0) throw InputError("--seeds must be positive");
  const GridSpec spec = grid_from_json(read_file(grid_path));
  const auto cohort = read_cohort_jsonl(cohort_path);
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < a.seeds; ++i) seeds.push_back(a.seed + i);

  const ComparisonGrid grid = run_comparison(cohort, spec, seeds, a.jobs);
  const std::string csv = grid.to_csv(a.timing);
  if (!a.csv.empty()) write_file_atomic(a.csv, csv);
  if (!a.json_out.empty()) write_file_atomic(a.json_out, grid.to_json(a.timing));
  if (a.csv.empty() && a.json_out.empty()) out << csv;

  std::size_t ok = 0;
  for (const GridResult& r : grid.rows) {
    if (r.ok) ++ok;
    else log.info("row '", r.name, "' failed: ", r.failure);
  }
  log.info(ok, " of ", grid.rows.size(), " rows succeeded");
  return ok > 0 ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Next-admission diagnosis prediction with bidirectional gated RNNs", "ligdoctor"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress log messages on standard error");
  const Logger log(err, quiet);

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Map ICD-9 codes to CCS labels and filter the cohort");
  prepare->add_option("--input", prep.input, "Raw patients (JSON lines)")->required();
  prepare->add_option("--ccs", prep.ccs, "ICD-9 to CCS map (CSV)")->required();
  prepare->add_option("--output", prep.output, "Prepared cohort (JSON lines)")->required();
  prepare->add_option("--report", prep.report, "Filter report (JSON)");

  SynthArgs syn;
  auto* synth = app.add_subcommand("synth", "Generate a planted-kernel synthetic cohort");
  synth->add_option("--patients", syn.patients, "Number of patients")->capture_default_str();
  synth->add_option("--states", syn.states, "Latent states")->capture_default_str();
  synth->add_option("--vocab", syn.vocab, "Vocabulary size")->capture_default_str();
  synth->add_option("--mean-codes", syn.mean_codes, "Mean codes per admission")->capture_default_str();
  synth->add_option("--noise", syn.noise, "Noise-code fraction in [0, 1)")->capture_default_str();
  synth->add_option("--seed", syn.seed, "Generator seed")->capture_default_str();
  synth->add_option("--output", syn.output, "Patients (JSON lines, icd9 field)")->required();
  synth->add_option("--map", syn.map, "Identity CCS map (CSV)");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model with early stopping");
  train_cmd->add_option("--cohort", tr.cohort, "Prepared cohort (JSON lines)")->required();
  train_cmd->add_option("--config", tr.config, "Training configuration (JSON)");
  train_cmd->add_option("--model", tr.model, "Output checkpoint")->required();
  train_cmd->add_option("--report", tr.report, "Output training report (JSON)");
  train_cmd->add_option("--ccs", tr.ccs, "CCS map whose descriptions are stored in the model");
  train_cmd->add_option("--seed", tr.seed, "Overrides the config seed");
  train_cmd->add_option("--max-epochs", tr.max_epochs, "Overrides max_epochs");
  train_cmd->add_option("--hidden", tr.hidden, "Overrides hidden_size");
  train_cmd->add_option("--batch-size", tr.batch_size, "Overrides batch_size");
  train_cmd->add_option("--layers", tr.layers, "Overrides layers");
  train_cmd->add_option("--cell", tr.cell, "Overrides cell_kind");
  train_cmd->add_flag("--timing", tr.timing, "Include wall time in the report");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Recall@k of a model on a cohort");
  evaluate->add_option("--model", ev.model, "Checkpoint")->required();
  evaluate->add_option("--cohort", ev.cohort, "Prepared cohort (JSON lines)")->required();
  evaluate->add_option("--k", ev.ks, "Cut-offs")->capture_default_str();
  evaluate->add_option("--protocol", ev.protocol, "full or prefix")->capture_default_str();
  evaluate->add_option("--split-seed", ev.split_seed,
                       "Evaluate only the held-out part of the split with this seed");
  evaluate->add_option("--split-fraction", ev.split_fraction, "Training fraction of that split")
      ->capture_default_str();
  evaluate->add_option("--report", ev.report, "Write the result here instead of standard output");

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Rank codes for each patient's next admission");
  predict->add_option("--model", pr.model, "Checkpoint")->required();
  predict->add_option("--history", pr.history, "Patient histories (JSON lines)")->required();
  predict->add_option("--k", pr.k, "Number of codes")->capture_default_str();
  predict->add_option("--ccs", pr.ccs, "Map the history's ICD-9 codes through this CCS map");

  GradCheckArgs gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the network gradients");
  gradcheck->add_option("--dims", gc.dims, "Dimension preset")->capture_default_str();
  gradcheck->add_option("--steps", gc.steps, "Sequence length");
  gradcheck->add_option("--hidden", gc.hidden, "Hidden width");
  gradcheck->add_option("--codes", gc.codes, "Code vocabulary width");
  gradcheck->add_option("--patients", gc.patients, "Patients in the batch");
  gradcheck->add_option("--cell", gc.cells, "Cell kinds to check (default: all)");
  gradcheck->add_option("--layers", gc.layers, "Stacked layers")->capture_default_str();
  gradcheck->add_flag("--unidirectional", gc.unidirectional, "Drop the backward flow");
  gradcheck->add_option("--tolerance", gc.tolerance, "Maximum relative error")->capture_default_str();
  gradcheck->add_flag("--corrupt", gc.corrupt, "Perturb one analytic coordinate (negative control)");

  CompareArgs cmp;
  auto* compare = app.add_subcommand("compare", "Train and evaluate a grid of configurations");
  compare->add_option("--grid", cmp.grid, "Grid specification (JSON)")->required();
  compare->add_option("--cohort", cmp.cohort, "Prepared cohort (JSON lines)")->required();
  compare->add_option("--seeds", cmp.seeds, "Number of split seeds")->capture_default_str();
  compare->add_option("--seed", cmp.seed, "First split seed")->capture_default_str();
  compare->add_option("--jobs", cmp.jobs, "Worker threads")->capture_default_str();
  compare->add_option("--csv", cmp.csv, "Output CSV");
  compare->add_option("--json", cmp.json_out, "Output JSON");
  compare->add_flag("--timing", cmp.timing, "Include mean wall time per row");

  std::vector<std::string> argv_store = {"ligdoctor"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  ev.ks_given = evaluate->count("--k") > 0;
  pr.k_given = predict->count("--k") > 0;
  try {
    if (*prepare) return cmd_prepare(prep, log);
    if (*synth) return cmd_synth(syn, log);
    if (*train_cmd) return cmd_train(tr, log);
    if (*evaluate) return cmd_evaluate(ev, out, log);
    if (*predict) return cmd_predict(pr, out, log);
    if (*gradcheck) return cmd_gradcheck(gc, out);
    if (*compare) return cmd_compare(cmp, out, log);
  } catch (const Error& e) {
    err << "ligdoctor: error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "ligdoctor: error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace ligdoctor::cli
