#include "pehaz/cli.hpp"

int main(int argc, char** argv) { return pehaz::cli::run(argc, argv); }
