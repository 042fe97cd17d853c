#include "carinox/cli.hpp"

int main(int argc, char** argv) { return carinox::cli::cli_dispatch(argc, argv); }
