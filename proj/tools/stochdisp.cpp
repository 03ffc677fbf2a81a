#include "stochdisp/cli.hpp"

int main(int argc, char** argv) { return stochdisp::cli::run(argc, argv); }
