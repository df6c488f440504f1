#include "liri/cli.hpp"

int main(int argc, char** argv) { return liri::cli_main(argc, argv); }
