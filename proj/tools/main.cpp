#include "pkgscan/cli.hpp"

int main(int argc, char** argv) {
    return pkgscan::cli::run(argc, argv);
}
