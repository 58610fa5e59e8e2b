#include "etruck/cli.hpp"

int main(int argc, char** argv) { return etruck::run_cli(argc, argv); }
