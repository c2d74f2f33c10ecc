#include "kae/cli.hpp"

int main(int argc, char** argv) { return kae::run_cli(argc, argv); }
