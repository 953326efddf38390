#include <iostream>

#include "rankinfer/cli.hpp"

int main(int argc, char** argv) {
    rankinfer::cli::RunConfig config;
    const int parse_code = rankinfer::cli::parse_args(argc, argv, config, std::cerr);
    if (parse_code != rankinfer::cli::kExitOk || config.help_requested) return parse_code;
    return rankinfer::cli::run(config, std::cout, std::cerr);
}
