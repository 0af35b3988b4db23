#include "affrig/cli.hpp"

int main(int argc, char** argv) { return affrig::cli_main(argc, argv); }
