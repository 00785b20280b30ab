#include "deeplde/cli.hpp"

int main(int argc, char** argv) { return deeplde::run_cli(argc, argv); }
