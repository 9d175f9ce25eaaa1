#include "t2s/cli.hpp"

int main(int argc, char** argv) {
    return t2s::dispatch(argc, argv);
}
