#include "rum/cli.hpp"

int main(int argc, char** argv) { return rum::cli::dispatch(argc, argv); }
