#include "qfs/cli.hpp"

int main(int argc, char** argv) { return qfs::cli::run(argc, argv); }
