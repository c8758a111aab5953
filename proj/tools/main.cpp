#include "trajdiff/cli.hpp"

int main(int argc, char** argv) { return trajdiff::cli_main(argc, argv); }
