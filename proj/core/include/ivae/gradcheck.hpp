#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ivae/params.hpp"

namespace ivae {

// One finite-difference certification: reverse-mode against central
// differences (h = 1e-5, 64-bit). err is relative unless both sides sit
// below 1e-8 in magnitude, in which case it is the absolute difference.
struct GradCheckCase {
    std::string name;
    double max_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Central differences over every scalar in the store, h = 1e-5.
ParamStore<double> finite_diff_param_grads(ParamStore<double>& params, const std::function<double()>& value);

double max_grad_error(const ParamStore<double>& analytic, const ParamStore<double>& fd);

// Every layer type and every composite loss used in the repo, each against
// the finite-difference oracle. full widens the nets and adds seeds.
std::vector<GradCheckCase> run_gradcheck_suite(bool full);

bool all_pass(const std::vector<GradCheckCase>& cases);

}  // namespace ivae
