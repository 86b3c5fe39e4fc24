#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "uniid/tensor.hpp"

namespace uniid {

// Forward-process coefficients: linear betas, alpha_bars as exact cumulative
// products. Kept in double so the recurrence holds to 1e-10 regardless of the
// training precision.
struct NoiseSchedule {
    int timesteps = 0;
    std::vector<double> betas;
    std::vector<double> alpha_bars;

    static NoiseSchedule linear(int timesteps, double beta_start, double beta_end) {
        if (timesteps < 1) throw std::invalid_argument("schedule: timesteps must be >= 1");
        if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
            throw std::invalid_argument("schedule: need 0 < beta_start <= beta_end < 1");
        NoiseSchedule s;
        s.timesteps = timesteps;
        s.betas.resize(timesteps);
        s.alpha_bars.resize(timesteps);
        double prod = 1.0;
        for (int t = 0; t < timesteps; ++t) {
            s.betas[t] = timesteps == 1
                             ? beta_start
                             : beta_start + (beta_end - beta_start) * (double)t / (timesteps - 1);
            prod *= 1.0 - s.betas[t];
            s.alpha_bars[t] = prod;
        }
        return s;
    }

    double alpha_bar(int t) const { return alpha_bars.at(t); }
};

// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps
template <typename S>
TensorT<S> q_sample(const TensorT<S>& x0, int t, const TensorT<S>& eps, const NoiseSchedule& sched) {
    if (x0.shape() != eps.shape()) shape_fail("q_sample", x0.shape(), eps.shape());
    if (t < 0 || t >= sched.timesteps)
        throw std::invalid_argument("q_sample: t out of range [0, T)");
    const double ab = sched.alpha_bar(t);
    return add(smul(x0, (S)std::sqrt(ab)), smul(eps, (S)std::sqrt(1.0 - ab)));
}

} // namespace uniid
