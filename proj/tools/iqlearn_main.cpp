#include "iqlearn/cli.hpp"

int main(int argc, char** argv) { return iqlearn::cli_run(argc, argv); }
