#include "fqr/cli.hpp"

int main(int argc, char** argv) { return fqr::cli_main(argc, argv); }
