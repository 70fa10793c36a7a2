#include "jexpand/cli.hpp"

int main(int argc, char** argv) { return jexpand::cli::run(argc, argv); }
