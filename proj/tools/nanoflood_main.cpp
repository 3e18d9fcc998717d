#include "nanoflood/io.hpp"

int main(int argc, char** argv) { return nanoflood::cli_main(argc, argv); }
