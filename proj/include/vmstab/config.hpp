#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vmstab/analysis.hpp"
#include "vmstab/equilibrium.hpp"
#include "vmstab/kinetic_ops.hpp"

namespace vmstab {

// Sectioned key = value file; see configs/README.md for every key.
struct RunConfig {
    std::string path;
    std::uint64_t hash = 0;  // FNV-1a of the file bytes

    // [profile]
    std::string family;
    std::string table;  // tabulated family only, relative to the config file
    ParamMap params;

    // [domain]
    double period = 1.0;
    double alpha = 3.0;
    std::optional<double> c_weight;  // empty: smallest admissible constant
    double n0 = 0.0;

    // [grid]
    int nx = 32;
    int nv = 32;
    int v_panels = 1;  // composite Gauss-Legendre panels per velocity axis
    int M = 8;
    std::optional<double> v_max;  // empty: chosen from the profile tail
    double v_max_tol = 1e-10;

    // [equilibrium]
    bool solve = true;  // method = none keeps zero fields
    EquilibriumOptions eq;

    // [kinetic]
    KineticOptions kinetic;

    // [operators]
    OperatorOptions ops;

    // [criterion]
    CriterionOptions criterion;

    // [scan]
    ScanOptions scan;
    std::vector<int> n_list;  // empty: {2M}

    // [convergence]
    int levels = 2;  // level l multiplies M, N_x, N_v by refine_*^l
    double refine_M = 2.0, refine_nx = 2.0, refine_nv = 2.0;
    bool convergence_mode = false;  // also locate lambda0 at every level

    // [output]
    bool write_csv = true;
    bool write_matrices = false;
};

RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text, const std::string& origin, const std::string& base_dir = ".");

}  // namespace vmstab
