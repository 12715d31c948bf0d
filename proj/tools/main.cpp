#include "cli.hpp"

int main(int argc, char** argv) { return halfdirac::cli::main(argc, argv); }
