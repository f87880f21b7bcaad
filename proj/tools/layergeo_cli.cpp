#include "layergeo/cli.hpp"

int main(int argc, char** argv) { return layergeo::run_cli(argc, argv); }
