#include "seqstory/cli.hpp"

int main(int argc, char** argv) { return seqstory::cli::run(argc, argv); }
