#include "opcast/pipeline.hpp"

int main(int argc, char** argv) { return opcast::run_cli(argc, argv); }
