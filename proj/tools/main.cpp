#include "ctdgan/cli.hpp"

int main(int argc, char** argv) { return ctdgan::cli::run(argc, argv); }
