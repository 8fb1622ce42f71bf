#include "depgraph/cli.hpp"

int main(int argc, char** argv) { return depgraph::run(argc, argv); }
