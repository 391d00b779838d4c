// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "relight/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return relight::run_cli(args, std::cout, std::cerr);
}
