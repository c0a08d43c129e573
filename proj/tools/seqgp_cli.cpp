#include "seqgp/cli.hpp"

int main(int argc, char** argv) { return seqgp::cli_main(argc, argv); }
