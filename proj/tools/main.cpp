#include "compliance_lab/cli.hpp"

int main(int argc, char** argv) { return clab::cli_dispatch(argc, argv); }
