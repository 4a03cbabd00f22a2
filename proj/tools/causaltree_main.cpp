#include "causaltree/cli.hpp"

int main(int argc, char** argv) { return causaltree::cli::run(argc, argv); }
