#include "tlsinv/cli.hpp"

int main(int argc, char** argv) { return tlsinv::cli_main(argc, argv); }
