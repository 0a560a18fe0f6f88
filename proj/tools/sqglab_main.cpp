#include "sqglab/cli.hpp"

int main(int argc, char** argv) { return sqglab::main_cli(argc, argv); }
