// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.
//
// The `ligdoctor` command line as a callable function, so tests can drive it
// in-process.

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ligdoctor::cli {

// Exit codes returned by run_cli.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitVocabulary = 4;
inline constexpr int kExitGradCheck = 5;

// Environment variable naming the directory that relative input paths are
// resolved against.
inline constexpr const char* kDataDirEnv = "LIGDOCTOR_DATA_DIR";

// `args` excludes the program name. Results go to `out`, logs and errors to
// `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ligdoctor::cli
