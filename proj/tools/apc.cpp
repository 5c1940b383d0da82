#include "apc/harness/cli.hpp"

int main(int argc, char** argv) { return apc::harness::run_cli(argc, argv); }
