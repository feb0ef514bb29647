#include "nbpss/cli.hpp"

int main(int argc, char** argv) { return nbpss::main_dispatch(argc, argv); }
