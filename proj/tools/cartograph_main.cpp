#include "cartograph/cli.hpp"

int main(int argc, char** argv) { return cartograph::cli::run(argc, argv); }
