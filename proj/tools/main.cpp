#include "cli.hpp"

int main(int argc, char** argv) { return abe_cities::cli::run(argc, argv); }
