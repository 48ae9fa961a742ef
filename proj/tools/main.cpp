#include "hybridloc/pipeline.hpp"

int main(int argc, char** argv) { return hybridloc::cli_main(argc, argv); }
