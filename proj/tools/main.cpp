#include "cli.hpp"

int main(int argc, char** argv) { return phireg::cli::dispatch(argc, argv); }
