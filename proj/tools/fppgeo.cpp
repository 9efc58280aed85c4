#include "fppgeo/cli.hpp"

int main(int argc, char** argv) { return fppgeo::cli::run(argc, argv); }
