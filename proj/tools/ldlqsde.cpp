#include "ldl/cli.hpp"

int main(int argc, char** argv) { return ldl::run_cli(argc, argv); }
