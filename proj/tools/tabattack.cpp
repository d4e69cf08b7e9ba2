#include "tabattack/cli/pipeline.hpp"

int main(int argc, char** argv) { return tabattack::cli::run_cli(argc, argv); }
