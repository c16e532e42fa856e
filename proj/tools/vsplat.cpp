#include <vsplat/cli.hpp>

int main(int argc, char** argv) { return vsplat::cli::run(argc, argv); }
