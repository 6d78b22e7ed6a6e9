#include "zrdiff/cli.hpp"

int main(int argc, char** argv) { return zrdiff::run_cli(argc, argv); }
