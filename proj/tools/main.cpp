#include "cli.hpp"

int main(int argc, char** argv) { return sizer::cli::run(argc, argv); }
