#pragma once

#include <functional>
#include <string>

#include "dmps/params.hpp"

namespace dmps {

struct GradCheckResult {
    bool passed = false;
    double max_rel_err = 0.0;
    std::string worst_param;
    int worst_index = -1;
};

// Central-difference comparison (f(x+h) - f(x-h)) / 2h against the analytic
// gradients stored in `params`. The oracle only evaluates `loss_fn` forward,
// so it is independent of the backward rules it checks. Relative error uses
// an absolute floor so near-zero gradients do not blow up the ratio.
GradCheckResult finite_difference_check(
    ParamStore& params, const std::function<double(ParamStore&)>& loss_fn, double h = 1e-5,
    double tolerance = 1e-4, double floor = 1e-6);

}  // namespace dmps
