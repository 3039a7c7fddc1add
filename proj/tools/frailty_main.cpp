#include "frailty/cli.hpp"

int main(int argc, char** argv) { return frailty::run_cli(argc, argv); }
