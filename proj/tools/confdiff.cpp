#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "confdiff/cli/commands.hpp"
#include "confdiff/cli/config.hpp"

namespace {

using confdiff::cli::Command;

struct Flags {
    std::string config_path;
    std::string out;
    std::string example;
    std::optional<unsigned long long> seed;
    std::string resolution;
    std::string domain;
    std::string d0;
    std::optional<int> workers;
    std::vector<std::string> assignments;
};

void add_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config_path, "key=value configuration file");
    sub->add_option("--out", f.out, "output file (default: stdout)");
    sub->add_option("--example", f.example, "built-in example: radial, waves, wedge, slab");
    sub->add_option("--seed", f.seed, "random seed");
    sub->add_option("--resolution", f.resolution, "grid resolution NXxNY");
    sub->add_option("--domain", f.domain, "domain rectangle x0,x1,y0,y1");
    sub->add_option("--d0", f.d0, "bulk diffusion constant");
    sub->add_option("--workers", f.workers, "worker threads (0: hardware concurrency)");
    sub->add_option("--set", f.assignments, "override a configuration key: key=value");
}

confdiff::cli::Config resolve(Command c, const Flags& f) {
    confdiff::cli::Config cfg(c);
    confdiff::cli::KeyValues file;
    std::string example = f.example;
    if (!f.config_path.empty()) {
        for (auto& kv : confdiff::cli::read_config_file(f.config_path)) {
            if (kv.first == "example") {
                if (example.empty()) example = kv.second;
            } else {
                file.push_back(std::move(kv));
            }
        }
    }
    if (!example.empty()) cfg.apply_example(example);
    cfg.apply(file);
    confdiff::cli::KeyValues flags;
    if (f.seed) flags.emplace_back("seed", std::to_string(*f.seed));
    if (!f.resolution.empty()) flags.emplace_back("resolution", f.resolution);
    if (!f.domain.empty()) flags.emplace_back("domain", f.domain);
    if (!f.d0.empty()) flags.emplace_back("d0", f.d0);
    if (f.workers) flags.emplace_back("workers", std::to_string(*f.workers));
    for (const auto& a : f.assignments) flags.push_back(confdiff::cli::split_assignment(a));
    if (!f.out.empty()) flags.emplace_back("out", f.out);
    cfg.apply(flags);
    return cfg;
}

int run(Command c, const Flags& f) {
    const confdiff::cli::Config cfg = resolve(c, f);
    const std::string& path = cfg.str("out");
    std::ofstream file;
    if (path != "-") {
        file.open(path, std::ios::binary | std::ios::trunc);
        if (!file) throw confdiff::ConfigError("cannot open output file '" + path + "'");
    }
    std::ostringstream buf;
    const int code = confdiff::cli::run_command(cfg, buf);
    std::ostream& out = path == "-" ? std::cout : file;
    out << buf.str();
    out.flush();
    if (!out) throw confdiff::ConfigError("failed writing output");
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Effective diffusion tensors for diffusion confined between two surfaces"};
    app.set_version_flag("--version", std::string(confdiff::cli::kToolVersion));
    app.require_subcommand(1);

    const std::vector<std::pair<Command, std::string>> commands{
        {Command::tensor, "evaluate the tensor field of a surface pair on a lattice (CSV)"},
        {Command::planes, "analyse one plane pair (JSON)"},
        {Command::oracle, "compare the closed form with the quadrature oracle (JSON)"},
        {Command::mc, "reflected Brownian motion estimate of the projected tensor (JSON)"},
        {Command::solve, "run the projected diffusion equation (CSV snapshots)"},
        {Command::recover_channel, "compare the surface pipeline with the planar channel formula (CSV)"},
    };
    Flags flags;
    std::vector<std::pair<CLI::App*, Command>> subs;
    for (const auto& [c, help] : commands) {
        CLI::App* sub = app.add_subcommand(std::string(confdiff::cli::command_name(c)), help);
        add_flags(sub, flags);
        subs.emplace_back(sub, c);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        for (const auto& [sub, c] : subs) {
            if (sub->parsed()) return run(c, flags);
        }
    } catch (const confdiff::ConfigError& e) {
        std::cerr << "confdiff: configuration error: " << e.what() << '\n';
        return 2;
    } catch (const confdiff::NumericalError& e) {
        std::cerr << "confdiff: numerical error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "confdiff: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
