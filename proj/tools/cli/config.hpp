#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hidim/data.hpp"

namespace hidim::cli {

enum class Scenario { mean_iid, mean_projection_scan, mean_dependent, covariance, multinomial };

Scenario parse_scenario(const std::string& name);
std::string scenario_name(Scenario s);

// Declarative simulation description read from a flat INI file with the sections
// [simulation], [model] and [methods]. See README for every key.
struct SimConfig {
    Scenario scenario = Scenario::mean_iid;
    Index n = 50;
    Index m = 50;
    Index p = 10;
    Index replications = 100;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    std::vector<std::string> methods;

    // [model]
    double delta = 0.0;          // mean shift of the second group (or pi perturbation for multinomial)
    Index shift_coords = 0;      // number of shifted coordinates; 0 means all
    std::string sigma = "identity";
    std::string innovation = "normal";
    std::vector<double> ma_coefficients{1.0};  // A_j = coefficient_j * L with L L^T = sigma
    double sigma2_scale = 1.0;   // second covariance group is this multiple of the first
    Index groups = 2;            // covariance equality tests with K groups of size n
    std::string pi = "uniform";

    // [methods]
    int permutations = 199;
    Index projections = 50;
    Index null_reps = 200;
    Index k = 0;                 // projected dimension (0 = method default)
    Index k_min = 1;
    Index k_max = 0;
    Index order = 1;             // dependence order assumed by apr
    double tau0 = 1.0;
    double df = -1.0;
    std::string projection = "gaussian";
};

// Throws InputError naming the line and field on any problem.
SimConfig parse_sim_config(std::istream& in);
SimConfig load_sim_config(const std::string& path);

std::vector<std::string> split_list(const std::string& text);

}  // namespace hidim::cli
