// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "tiflab/cli/app.hpp"

int main(int argc, char** argv) { return tiflab::cli::run(argc, argv, std::cout, std::cerr); }
