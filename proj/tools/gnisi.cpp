#include "gnisi/cli.hpp"

int main(int argc, char** argv) { return gnisi::cli_dispatch(argc, argv); }
