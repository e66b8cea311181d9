#include "kvda/experiment.hpp"

int main(int argc, char** argv) { return kvda::cli_main(argc, argv); }
