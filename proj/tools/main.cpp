#include "cli.hpp"

int main(int argc, char** argv) { return slim::cli_main(argc, argv); }
