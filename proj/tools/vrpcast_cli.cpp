#include <iostream>

#include "vrpcast/cli.hpp"

int main(int argc, char** argv)
{
    return vrpcast::cli::dispatch(argc, argv, std::cout, std::cerr);
}
