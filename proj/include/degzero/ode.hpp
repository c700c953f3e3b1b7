#pragma once
#include <cmath>

namespace degzero {

// Classical fourth-order Runge-Kutta with compensated accumulation of the
// increments. Long horizons (10^4..10^6 steps) otherwise lose the last
// few digits to round-off in the state update.
template <class State>
class Rk4 {
public:
    Rk4(State y0, double t0 = 0.0) : y_(y0), comp_(y0 - y0), t0_(t0), steps_(0) {}

    template <class Rhs>
    void step(const Rhs& rhs, double dt) {
        const double t = time(dt);
        const State k1 = rhs(t, y_);
        const State k2 = rhs(t + 0.5 * dt, State(y_ + (0.5 * dt) * k1));
        const State k3 = rhs(t + 0.5 * dt, State(y_ + (0.5 * dt) * k2));
        const State k4 = rhs(t + dt, State(y_ + dt * k3));
        const State incr = (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const State corrected = incr - comp_;
        const State next = y_ + corrected;
        comp_ = (next - y_) - corrected;
        y_ = next;
        ++steps_;
    }

    const State& state() const { return y_; }
    long steps() const { return steps_; }
    double time(double dt) const { return t0_ + static_cast<double>(steps_) * dt; }

private:
    State y_;
    State comp_;
    double t0_;
    long steps_;
};

}  // namespace degzero
