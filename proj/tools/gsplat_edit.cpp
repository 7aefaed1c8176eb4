#include "gsedit/cli.hpp"

int main(int argc, char** argv) { return gsedit::cli::run(argc, argv); }
