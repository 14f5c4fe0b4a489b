#pragma once

#include <limits>
#include <string>
#include <unordered_map>

#include "dmps/params.hpp"
#include "dmps/tensor.hpp"

namespace dmps {

// Adam accumulators plus the plateau-scheduler bookkeeping.
struct OptimizerState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step = 0;

    std::unordered_map<std::string, Tensor> first_moment;
    std::unordered_map<std::string, Tensor> second_moment;

    double best_metric = std::numeric_limits<double>::infinity();
    int plateau_count = 0;
};

OptimizerState make_optimizer(double learning_rate);

// Bias-corrected Adam update using the gradients stored in `params`.
// Every parameter must have received a gradient since the last zero_grads().
void adam_step(ParamStore& params, OptimizerState& state);

// ReduceLROnPlateau: when `metric` fails to improve the best seen value for
// more than `patience` consecutive calls, learning rate <- learning rate *
// factor and the counter resets. Lower metric is better.
void plateau_scheduler(OptimizerState& state, double metric, double factor = 0.9,
                       int patience = 1);

}  // namespace dmps
