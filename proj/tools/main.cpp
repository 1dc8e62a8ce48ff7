#include "artifact/pipeline.hpp"

int main(int argc, char** argv) { return artifact::run_cli(argc, argv); }
