#include "slgraph/cli.hpp"

int main(int argc, char** argv) { return slg::cli::main(argc, argv); }
