#include "osr/cli.hpp"

int main(int argc, const char** argv) { return osr::cli_main(argc, argv); }
