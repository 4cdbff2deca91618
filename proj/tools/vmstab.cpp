#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

#include "vmstab/config.hpp"
#include "vmstab/errors.hpp"
#include "vmstab/parallel.hpp"
#include "vmstab/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"vmstab: spectral stability analysis of periodic 1.5D relativistic Vlasov-Maxwell equilibria"};
    app.require_subcommand(1, 1);

    std::string config;
    std::string out = ".";
    int threads = 0;
    std::uint64_t seed = 0;
    const char* descr[][2] = {{"equilibrium", "solve for the equilibrium fields"},
                              {"criterion", "evaluate the instability criterion at lambda = 0"},
                              {"mode", "locate lambda0 and reconstruct the growing mode"},
                              {"convergence", "repeat the criterion under grid refinement"}};
    for (auto& d : descr) {
        CLI::App* sub = app.add_subcommand(d[0], d[1]);
        sub->add_option("--config", config, "INI configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory");
        sub->add_option("--threads", threads, "worker threads (default: VMSTAB_THREADS, else 1)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "seed for the randomized negative control");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        if (threads > 0) vmstab::set_thread_count(threads);
        const vmstab::RunConfig cfg = vmstab::load_config(config);
        vmstab::RunSettings rs;
        rs.out_dir = out;
        rs.seed = seed;
        return vmstab::run_pipeline(command, cfg, rs, std::cout);
    } catch (const std::exception& e) {  // vmstab::Error messages already carry the kind
        std::cerr << "vmstab: " << e.what() << "\n";
        return 1;
    }
}
