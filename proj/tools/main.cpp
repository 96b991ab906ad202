#include "cli.hpp"

int main(int argc, char** argv) { return tsfactor::cli::run(argc, argv); }
