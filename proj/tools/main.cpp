// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "mxsafe/cli.hpp"

int main(int argc, char** argv) { return mxsafe::cli::run(argc, argv, std::cout, std::cerr); }
