#include "safectl/core.hpp"

#include <algorithm>
#include <cmath>

namespace safectl {

BarrierFunction with_fd_gradient(int dim, std::function<double(const StateVec&)> value,
                                 double h) {
    if (h <= 0.0) throw ConfigError("finite-difference step must be positive");
    BarrierFunction b;
    b.dim = dim;
    b.value = value;
    b.gradient = [value, dim, h](const StateVec& x) {
        StateVec g(dim);
        StateVec probe = x;
        for (int i = 0; i < dim; ++i) {
            const double xi = x(i);
            probe(i) = xi + h;
            const double hi = value(probe);
            probe(i) = xi - h;
            const double lo = value(probe);
            probe(i) = xi;
            g(i) = (hi - lo) / (2.0 * h);
        }
        return g;
    };
    return b;
}

double phi_eval(const BarrierFunction& b, const StateVec& x) {
    if (x.size() != b.dim) {
        throw ConfigError("barrier expects dimension " + std::to_string(b.dim) +
                          ", got " + std::to_string(x.size()));
    }
    return b.value(x);
}

double grad_check(const BarrierFunction& b, const StateVec& x, double h) {
    if (h <= 0.0) throw ConfigError("grad_check: h must be positive");
    const StateVec analytic = b.gradient(x);
    StateVec fd(x.size());
    StateVec probe = x;
    for (int i = 0; i < x.size(); ++i) {
        const double xi = x(i);
        probe(i) = xi + h;
        const double hi = b.value(probe);
        probe(i) = xi - h;
        const double lo = b.value(probe);
        probe(i) = xi;
        fd(i) = (hi - lo) / (2.0 * h);
    }
    const double denom = std::max(1.0, analytic.cwiseAbs().maxCoeff());
    return (fd - analytic).cwiseAbs().maxCoeff() / denom;
}

SafeSubset::SafeSubset(BarrierFunction b, double theta_) : barrier(std::move(b)), theta(theta_) {
    if (theta < 0.0) throw ConfigError("safe subset threshold must be >= 0");
}

double distance_to_subset(const SafeSubset& s, const StateVec& x) {
    return std::max(0.0, s.theta - s.barrier.value(x));
}

InformationWindow::InformationWindow(StateVec now, StateVec prev, ActionVec last, double delta_)
    : x_now(std::move(now)), x_prev(std::move(prev)), u_last(std::move(last)), delta(delta_) {
    if (delta <= 0.0) throw ConfigError("information window lookback must be positive");
    if (x_now.size() != x_prev.size()) throw ConfigError("window state dimensions differ");
}

}  // namespace safectl
