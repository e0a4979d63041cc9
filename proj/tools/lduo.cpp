// lduo.cpp - Command-line entry point: lduo <subcommand> --config FILE --out DIR

#include <iostream>

#include <CLI11.hpp>

#include "lduo/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"LDUO hierarchical equations of motion solver"};
    app.require_subcommand(1, 1);

    lduo::cli::RunOptions opts;
    for (const auto& name : lduo::cli::subcommands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", opts.config_path, "YAML or JSON job config")->required()->check(CLI::ExistingFile);
        if (name != "validate") sub->add_option("--out", opts.out_dir, "output directory")->required();
        sub->add_option("--threads", opts.threads, "width of the parallel map")->check(CLI::PositiveNumber);
        sub->add_flag("--dump-lattice", opts.dump_lattice, "write lattice.jsonl");
        sub->callback([&opts, name] { opts.subcommand = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : lduo::cli::kExitValidation;
    }
    return lduo::cli::run(opts, std::cout, std::cerr);
}
