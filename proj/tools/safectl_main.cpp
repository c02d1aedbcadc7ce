#include "safectl/harness.hpp"

int main(int argc, char** argv) { return safectl::harness::cli_main(argc, argv); }
