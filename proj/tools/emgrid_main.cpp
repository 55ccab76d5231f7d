#include "emgrid/cli.hpp"

int main(int argc, char** argv) { return emgrid::cli_main(argc, argv); }
