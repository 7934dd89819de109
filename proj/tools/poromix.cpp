#include <iostream>

#include "poromix/cli.hpp"

int main(int argc, char** argv)
{
    return poromix::cli::main(argc, argv, std::cout, std::cerr);
}
