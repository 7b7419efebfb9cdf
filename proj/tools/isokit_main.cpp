#include "isokit/cli.hpp"

int main(int argc, char** argv) { return isokit::cli::run(argc, argv); }
