#include "dmps/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "dmps/errors.hpp"

namespace dmps {

OptimizerState make_optimizer(double learning_rate) {
    OptimizerState st;
    st.learning_rate = learning_rate;
    return st;
}

void adam_step(ParamStore& params, OptimizerState& state) {
    for (const auto& name : params.names())
        if (!params.grad_ready(name))
            throw std::logic_error("adam_step: missing gradient for parameter '" + name + "'");

    state.step += 1;
    const double b1 = state.beta1;
    const double b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    for (const auto& name : params.names()) {
        Tensor& w = params.value(name);
        const Tensor& g = params.grad(name);
        auto [mit, inserted_m] = state.first_moment.try_emplace(name, Tensor(w.rows(), w.cols()));
        auto [vit, inserted_v] = state.second_moment.try_emplace(name, Tensor(w.rows(), w.cols()));
        Tensor& m = mit->second;
        Tensor& v = vit->second;
        for (int i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            w[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

void plateau_scheduler(OptimizerState& state, double metric, double factor, int patience) {
    if (metric < state.best_metric) {
        state.best_metric = metric;
        state.plateau_count = 0;
        return;
    }
    state.plateau_count += 1;
    if (state.plateau_count > patience) {
        state.learning_rate *= factor;
        state.plateau_count = 0;
    }
}

}  // namespace dmps
