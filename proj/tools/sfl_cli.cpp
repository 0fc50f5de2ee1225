#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "sfl/experiment.hpp"
#include "sfl/parallel.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Minimax level laboratory for the scalar field equation"};
    app.require_subcommand(1);
    auto* run = app.add_subcommand("run", "run the experiment described by a config file");
    std::string config_path;
    std::string out_dir;
    long long seed = -1;
    int threads = 0;
    std::vector<std::string> overrides;
    run->add_option("config", config_path, "config file (key = value lines)")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--seed", seed, "random seed")->check(CLI::NonNegativeNumber);
    run->add_option("--threads", threads, "worker threads (default: SFL_THREADS or all cores)")->check(CLI::PositiveNumber);
    run->add_option("--override", overrides, "key=value, applied after the config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (threads > 0) sfl::set_thread_count(threads);
        auto cfg = sfl::load_experiment_config(config_path, overrides);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        const auto outcome = sfl::run(cfg);
        for (const auto& v : outcome.report.verdicts) {
            std::cout << sfl::to_string(v.status) << "  " << v.id << "  " << v.detail << "\n";
        }
        std::cout << "report " << cfg.out_dir << "/report.json  hash " << outcome.hash << "\n";
        return outcome.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
