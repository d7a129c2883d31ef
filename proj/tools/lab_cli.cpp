#include "cli.hpp"

int main(int argc, char** argv) { return ioslab::cli::cli_main(argc, argv); }
