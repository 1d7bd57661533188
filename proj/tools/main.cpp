#include "consensus/cli.hpp"

int main(int argc, char** argv) { return consensus::cli::run(argc, argv); }
