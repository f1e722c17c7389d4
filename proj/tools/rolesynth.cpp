#include "rolesynth/cli.hpp"

int main(int argc, char** argv) { return rolesynth::cli_main(argc, argv); }
