#include "actevo/cli.hpp"

int main(int argc, char** argv) { return actevo::cli::run(argc, argv); }
