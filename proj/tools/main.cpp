#include "turl/cli.hpp"

int main(int argc, char** argv) { return turl::run_cli(argc, argv); }
