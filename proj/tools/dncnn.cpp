#include "dncnn/cli.hpp"

int main(int argc, char** argv) { return dncnn::run_cli(argc, argv); }
