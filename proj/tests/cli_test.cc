// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#include "ligdoctor_cli/cli.h"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "ligdoctor/ehr_data.h"
#include "ligdoctor/io.h"
#include "ligdoctor/synth.h"

namespace ligdoctor::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ligdoctor_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }

  // Synthetic cohort prepared through the CLI.
  void make_cohort(std::size_t patients = 40, const std::string& seed = "3") {
    ASSERT_EQ(run({"--quiet", "synth", "--patients", std::to_string(patients), "--states", "6",
                   "--vocab", "30", "--mean-codes", "5", "--noise", "0", "--seed", seed,
                   "--output", path("raw.jsonl"), "--map", path("map.csv")}),
              kExitOk)
        << err_.str();
    ASSERT_EQ(run({"--quiet", "prepare", "--input", path("raw.jsonl"), "--ccs", path("map.csv"),
                   "--output", path("cohort.jsonl"), "--report", path("prep.json")}),
              kExitOk)
        << err_.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

const char* kTuberculosisMap =
    "icd9,ccs_label,description\n"
    "01000,1,Tuberculosis\n"
    "01001,1,Tuberculosis\n"
    "01002,1,Tuberculosis\n"
    "0030,7,Viral infection\n";

TEST_F(CliTest, PrepareMapsTableRows) {
  write_file_atomic(path("map.csv"), kTuberculosisMap);
  write_file_atomic(path("raw.jsonl"),
                    R"({"patient_id":"p","admissions":[{"timestamp":1,"icd9":["01000","01001","01002"]},)"
                    R"({"timestamp":2,"icd9":["01000","0030"],"duration_hours":4}]})"
                    "\n");
  ASSERT_EQ(run({"prepare", "--input", path("raw.jsonl"), "--ccs", path("map.csv"), "--output",
                 path("cohort.jsonl"), "--report", path("report.json")}),
            kExitOk)
      << err_.str();
  const auto cohort = read_cohort_jsonl(path("cohort.jsonl"));
  ASSERT_EQ(cohort.size(), 1u);
  EXPECT_EQ(cohort[0].admissions[0].codes, (std::set<std::string>{"1"}));
  EXPECT_EQ(cohort[0].admissions[1].codes, (std::set<std::string>{"1", "7"}));
  const json report = json::parse(read_file(path("report.json")));
  EXPECT_EQ(report["kept_patients"], 1);
}

TEST_F(CliTest, PrepareAllSingleAdmissionPatients) {
  write_file_atomic(path("map.csv"), kTuberculosisMap);
  write_file_atomic(path("raw.jsonl"),
                    R"({"patient_id":"a","admissions":[{"timestamp":1,"icd9":["01000"]}]})" "\n"
                    R"({"patient_id":"b","admissions":[{"timestamp":1,"icd9":["0030"]}]})" "\n");
  ASSERT_EQ(run({"--quiet", "prepare", "--input", path("raw.jsonl"), "--ccs", path("map.csv"),
                 "--output", path("cohort.jsonl"), "--report", path("report.json")}),
            kExitOk);
  EXPECT_EQ(read_file(path("cohort.jsonl")), "");
  const json report = json::parse(read_file(path("report.json")));
  EXPECT_EQ(report["removed_patients"]["fewer_than_two_admissions"], 2);
  EXPECT_EQ(report["kept_patients"], 0);
}

TEST_F(CliTest, MissingMapIsInputError) {
  write_file_atomic(path("raw.jsonl"), "");
  EXPECT_EQ(run({"prepare", "--input", path("raw.jsonl"), "--ccs", path("absent.csv"), "--output",
                 path("cohort.jsonl")}),
            kExitInput);
  EXPECT_NE(err_.str().find("absent.csv"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("cohort.jsonl")));
}

TEST_F(CliTest, UnknownFlagOrCommandIsInputError) {
  EXPECT_EQ(run({"train", "--bogus"}), kExitInput);
  EXPECT_EQ(run({"launch"}), kExitInput);
  EXPECT_EQ(run({}), kExitInput);
  EXPECT_EQ(run({"--help"}), kExitOk);
}

TEST_F(CliTest, TrainIsReproducibleAndHonoursMaxEpochs) {
  make_cohort();
  const std::vector<std::string> base = {"--quiet", "train", "--cohort", path("cohort.jsonl"),
                                         "--seed", "4", "--hidden", "8", "--max-epochs", "3"};
  auto a = base;
  a.insert(a.end(), {"--model", path("a.bin"), "--report", path("a.json")});
  auto b = base;
  b.insert(b.end(), {"--model", path("b.bin"), "--report", path("b.json")});
  ASSERT_EQ(run(a), kExitOk) << err_.str();
  ASSERT_EQ(run(b), kExitOk) << err_.str();
  EXPECT_EQ(read_file(path("a.bin")), read_file(path("b.bin")));
  EXPECT_EQ(read_file(path("a.json")), read_file(path("b.json")));
  EXPECT_EQ(json::parse(read_file(path("a.json")))["epochs"].size(), 3u);

  auto one = base;
  one[9] = "1";
  one.insert(one.end(), {"--model", path("c.bin"), "--report", path("c.json")});
  ASSERT_EQ(run(one), kExitOk);
  EXPECT_EQ(json::parse(read_file(path("c.json")))["epochs"].size(), 1u);
}

TEST_F(CliTest, TrainReadsConfigAndDataDirectory) {
  make_cohort();
  write_file_atomic(path("config.json"), R"({"hidden_size": 5, "max_epochs": 2, "cell_kind": "gru"})");
  ::setenv(kDataDirEnv, dir_.c_str(), 1);
  const int rc = run({"--quiet", "train", "--cohort", "cohort.jsonl", "--config", "config.json",
                      "--model", path("m.bin"), "--report", path("r.json")});
  ::unsetenv(kDataDirEnv);
  ASSERT_EQ(rc, kExitOk) << err_.str();
  EXPECT_EQ(json::parse(read_file(path("r.json")))["epochs"].size(), 2u);

  write_file_atomic(path("bad.json"), R"({"hidden_sise": 5})");
  EXPECT_EQ(run({"--quiet", "train", "--cohort", path("cohort.jsonl"), "--config", path("bad.json"),
                 "--model", path("m2.bin")}),
            kExitInput);
}

TEST_F(CliTest, DivergenceExitCode) {
  make_cohort();
  // Input noise near the double limit overflows the forward pass.
  write_file_atomic(path("config.json"), R"({"hidden_size": 4, "max_epochs": 5, "input_noise_std": 1e308})");
  EXPECT_EQ(run({"--quiet", "train", "--cohort", path("cohort.jsonl"), "--config", path("config.json"),
                 "--model", path("m.bin")}),
            kExitDivergence);
  EXPECT_NE(err_.str().find("diverged"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("m.bin")));
}

TEST_F(CliTest, PredictRanksAndValidatesVocabulary) {
  make_cohort();
  ASSERT_EQ(run({"--quiet", "train", "--cohort", path("cohort.jsonl"), "--hidden", "8",
                 "--max-epochs", "20", "--model", path("m.bin"), "--ccs", path("map.csv")}),
            kExitOk);
  const auto cohort = read_cohort_jsonl(path("cohort.jsonl"));
  write_file_atomic(path("history.jsonl"), cohort_to_jsonl({cohort[0]}));

  ASSERT_EQ(run({"--quiet", "predict", "--model", path("m.bin"), "--history", path("history.jsonl"),
                 "--k", "5"}),
            kExitOk)
      << err_.str();
  const json top = json::parse(out_.str());
  ASSERT_EQ(top.size(), 5u);
  for (std::size_t i = 1; i < top.size(); ++i)
    EXPECT_GE(top[i - 1]["probability"].get<double>(), top[i]["probability"].get<double>());
  EXPECT_EQ(top[0]["description"].get<std::string>().rfind("Synthetic code", 0), 0u);

  const std::size_t vocab = build_vocabulary(cohort).size();
  ASSERT_EQ(run({"--quiet", "predict", "--model", path("m.bin"), "--history", path("history.jsonl"),
                 "--k", std::to_string(vocab)}),
            kExitOk);
  const json all = json::parse(out_.str());
  double total = 0.0;
  std::set<std::string> codes;
  for (const auto& e : all) {
    total += e["probability"].get<double>();
    codes.insert(e["code"].get<std::string>());
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_EQ(codes.size(), vocab);

  write_file_atomic(path("unknown.jsonl"),
                    R"({"patient_id":"x","admissions":[{"timestamp":1,"ccs":["not-a-code"]}]})" "\n");
  EXPECT_EQ(run({"--quiet", "predict", "--model", path("m.bin"), "--history", path("unknown.jsonl")}),
            kExitVocabulary);
  write_file_atomic(path("unknown_icd.jsonl"),
                    R"({"patient_id":"x","admissions":[{"timestamp":1,"icd9":["99999"]}]})" "\n");
  EXPECT_EQ(run({"--quiet", "predict", "--model", path("m.bin"), "--history", path("unknown_icd.jsonl"),
                 "--ccs", path("map.csv")}),
            kExitVocabulary);
  EXPECT_EQ(run({"--quiet", "predict", "--model", path("m.bin"), "--history", path("history.jsonl"),
                 "--k", "0"}),
            kExitInput);
}

TEST_F(CliTest, PredictPlantedPatientFollowsKernel) {
  // Noise-free planted cohort: after training, the successor state's codes
  // lead the ranking.
  const SynthSpec spec = make_synth_spec(200, 6, 0.0, 5, 30, 5.0);
  const auto patients = generate_patients(spec);
  write_file_atomic(path("cohort.jsonl"), cohort_to_jsonl(generate_cohort(spec)));
  ASSERT_EQ(run({"--quiet", "train", "--cohort", path("cohort.jsonl"), "--hidden", "16",
                 "--max-epochs", "150", "--model", path("m.bin")}),
            kExitOk);
  const SynthPatient& p = patients[0];
  PatientRecord history = p.record;
  history.admissions.resize(1);
  write_file_atomic(path("history.jsonl"), cohort_to_jsonl({history}));
  const auto& truth = spec.codes_per_state[spec.transition_kernel[p.states[0]]];
  ASSERT_EQ(run({"--quiet", "predict", "--model", path("m.bin"), "--history", path("history.jsonl"),
                 "--k", std::to_string(truth.size())}),
            kExitOk);
  std::set<std::string> top;
  for (const auto& e : json::parse(out_.str())) top.insert(e["code"].get<std::string>());
  std::set<std::string> expected;
  for (std::size_t c : truth) expected.insert(synth_code_label(c, spec.vocab_size));
  EXPECT_EQ(top, expected);
}

TEST_F(CliTest, EvaluateReportsRecall) {
  make_cohort();
  ASSERT_EQ(run({"--quiet", "train", "--cohort", path("cohort.jsonl"), "--hidden", "6",
                 "--max-epochs", "3", "--model", path("m.bin"), "--report", path("r.json")}),
            kExitOk);
  ASSERT_EQ(run({"--quiet", "evaluate", "--model", path("m.bin"), "--cohort", path("cohort.jsonl"),
                 "--split-seed", "1"}),
            kExitOk)
      << err_.str();
  const json ev = json::parse(out_.str());
  const json report = json::parse(read_file(path("r.json")));
  EXPECT_EQ(ev["recall@10"], report["recall"]["recall@10"]);
  EXPECT_EQ(run({"--quiet", "evaluate", "--model", path("m.bin"), "--cohort", path("cohort.jsonl"),
                 "--protocol", "sideways"}),
            kExitInput);
}

TEST_F(CliTest, GradcheckPassesAndNegativeControlFails) {
  EXPECT_EQ(run({"gradcheck", "--dims", "small"}), kExitOk);
  EXPECT_NE(out_.str().find("PASS"), std::string::npos);
  EXPECT_EQ(run({"gradcheck", "--steps", "1"}), kExitOk);
  EXPECT_EQ(run({"gradcheck", "--cell", "mgru", "--corrupt"}), kExitGradCheck);
  EXPECT_NE(out_.str().find("FAIL"), std::string::npos);
  EXPECT_EQ(run({"gradcheck", "--cell", "rnn"}), kExitInput);
}

TEST_F(CliTest, CompareIsDeterministicWithBaselineRow) {
  make_cohort(30);
  write_file_atomic(path("grid.json"), R"({"base": {"hidden_size": 5, "max_epochs": 2},
    "rows": [{"name": "random", "random": true}, {"name": "mgru"}, {"name": "jordan", "cell_kind": "jordan"}]})");
  const std::vector<std::string> args = {"--quiet", "compare", "--grid", path("grid.json"), "--cohort",
                                         path("cohort.jsonl"), "--seeds", "2", "--jobs", "2"};
  auto a = args;
  a.insert(a.end(), {"--csv", path("a.csv"), "--json", path("a.json")});
  auto b = args;
  b.insert(b.end(), {"--csv", path("b.csv"), "--json", path("b.json")});
  ASSERT_EQ(run(a), kExitOk) << err_.str();
  ASSERT_EQ(run(b), kExitOk);
  EXPECT_EQ(read_file(path("a.csv")), read_file(path("b.csv")));
  EXPECT_EQ(read_file(path("a.json")), read_file(path("b.json")));
  const json grid = json::parse(read_file(path("a.json")));
  ASSERT_EQ(grid["rows"].size(), 3u);
  EXPECT_EQ(grid["rows"][0]["name"], "random");
  EXPECT_EQ(grid["rows"][0]["iterations"], 1.0);
}

}  // namespace
}  // namespace ligdoctor::cli
