#include "dmps/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dmps {

GradCheckResult finite_difference_check(ParamStore& params,
                                        const std::function<double(ParamStore&)>& loss_fn,
                                        double h, double tolerance, double floor) {
    GradCheckResult result;
    result.passed = true;
    for (const auto& name : params.names()) {
        const Tensor analytic = params.grad(name);
        Tensor& w = params.value(name);
        for (int i = 0; i < w.size(); ++i) {
            const double saved = w[i];
            w[i] = saved + h;
            const double up = loss_fn(params);
            w[i] = saved - h;
            const double down = loss_fn(params);
            w[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double ad = analytic[i];
            const double rel =
                std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), floor});
            if (rel > result.max_rel_err) {
                result.max_rel_err = rel;
                result.worst_param = name;
                result.worst_index = i;
            }
        }
    }
    result.passed = result.max_rel_err < tolerance;
    return result;
}

}  // namespace dmps
