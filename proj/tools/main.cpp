#include "fedpop/cli.hpp"

int main(int argc, char** argv) { return fedpop::cli::run(argc, argv); }
