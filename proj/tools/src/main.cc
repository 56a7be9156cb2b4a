// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#include <iostream>
#include <string>
#include <vector>

#include "ligdoctor_cli/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ligdoctor::cli::run_cli(args, std::cout, std::cerr);
}
