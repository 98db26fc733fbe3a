#include "bspde/cli.hpp"

int main(int argc, char** argv) { return bspde::cli_main(argc, argv); }
