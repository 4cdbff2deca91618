#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "vmstab/analysis.hpp"
#include "vmstab/config.hpp"
#include "vmstab/report.hpp"

namespace vmstab {

// Profile, velocity grid and solved equilibrium for one resolution.
struct Prepared {
    RunConfig cfg;
    EquilibriumProfile profile;
    VelocityGrid vg;
    EquilibriumSolve eq;
    double tail = 0.0;
    std::vector<std::string> warnings;
};

Prepared prepare(const RunConfig& cfg);
std::unique_ptr<AssemblyContext> make_context(const Prepared& p);

// Same config at resolution level l (M, N_x, N_v scaled by refine_*^l).
RunConfig refined(const RunConfig& cfg, int level);

struct RunSettings {
    std::string out_dir = ".";
    std::uint64_t seed = 0;
};

struct CommandResult {
    json report;
    int exit_code = 0;
};

CommandResult run_equilibrium(const RunConfig& cfg, const RunSettings& rs);
CommandResult run_criterion(const RunConfig& cfg, const RunSettings& rs);
CommandResult run_mode(const RunConfig& cfg, const RunSettings& rs);
CommandResult run_convergence(const RunConfig& cfg, const RunSettings& rs);

// Dispatch by name, write artifacts, print a one-line summary; returns the exit status.
int run_pipeline(const std::string& command, const RunConfig& cfg, const RunSettings& rs, std::ostream& log);

}  // namespace vmstab
