#include "cli.hpp"

int main(int argc, char** argv)
{
    return evalguard::cli::run_cli(argc, argv);
}
