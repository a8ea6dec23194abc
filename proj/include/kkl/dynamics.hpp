#pragma once

// Benchmark systems and fixed-step RK4 integration, forward and backward.
// Each built-in system carries hand-written interval extensions of its
// drift and output map so the verifier can enclose f and h over boxes.

#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "kkl/errors.hpp"
#include "kkl/interval.hpp"
#include "kkl/linalg.hpp"
#include "kkl/rng.hpp"

namespace kkl {

// Axis-aligned box.
struct Box {
    Vec lower;
    Vec upper;

    Box() = default;
    Box(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
        if (lower.size() != upper.size()) throw config_error("Box: dimension mismatch");
        for (std::size_t i = 0; i < lower.size(); ++i)
            if (lower[i] > upper[i]) throw config_error("Box: lower > upper");
    }

    static Box cube(int dim, double half_width) {
        return Box(Vec(dim, -half_width), Vec(dim, half_width));
    }

    int dim() const { return static_cast<int>(lower.size()); }

    bool contains(const Vec& x, double slack = 0.0) const {
        for (std::size_t i = 0; i < lower.size(); ++i)
            if (x[i] < lower[i] - slack || x[i] > upper[i] + slack) return false;
        return true;
    }

    IntervalVec as_intervals() const {
        IntervalVec iv(lower.size());
        for (std::size_t i = 0; i < lower.size(); ++i) iv[i] = {lower[i], upper[i]};
        return iv;
    }

    Vec center() const {
        Vec c(lower.size());
        for (std::size_t i = 0; i < lower.size(); ++i) c[i] = 0.5 * (lower[i] + upper[i]);
        return c;
    }

    double volume() const {
        double v = 1.0;
        for (std::size_t i = 0; i < lower.size(); ++i) v *= upper[i] - lower[i];
        return v;
    }

    int widest_dim() const {
        int best = 0;
        for (int i = 1; i < dim(); ++i)
            if (upper[i] - lower[i] > upper[best] - lower[best]) best = i;
        return best;
    }

    std::pair<Box, Box> bisect() const {
        const int d = widest_dim();
        Box a = *this, b = *this;
        const double m = 0.5 * (lower[d] + upper[d]);
        a.upper[d] = m;
        b.lower[d] = m;
        return {a, b};
    }
};

struct SystemModel {
    std::string name;
    int n_x = 0;
    int n_y = 0;
    std::function<Vec(const Vec&)> drift;
    std::function<Vec(const Vec&)> output;
    std::function<IntervalVec(const Box&)> drift_interval;
    std::function<IntervalVec(const Box&)> output_interval;
};

inline SystemModel reverse_duffing() {
    SystemModel s;
    s.name = "reverse_duffing";
    s.n_x = 2;
    s.n_y = 1;
    s.drift = [](const Vec& x) { return Vec{x[1] * x[1] * x[1], -x[0]}; };
    s.output = [](const Vec& x) { return Vec{x[0]}; };
    s.drift_interval = [](const Box& b) {
        const IntervalVec x = b.as_intervals();
        return IntervalVec{cube(x[1]), -x[0]};
    };
    s.output_interval = [](const Box& b) { return IntervalVec{b.as_intervals()[0]}; };
    return s;
}

inline SystemModel van_der_pol(double mu = 1.0) {
    SystemModel s;
    s.name = "van_der_pol";
    s.n_x = 2;
    s.n_y = 1;
    s.drift = [mu](const Vec& x) {
        return Vec{x[1], mu * (1.0 - x[0] * x[0]) * x[1] - x[0]};
    };
    s.output = [](const Vec& x) { return Vec{x[0]}; };
    s.drift_interval = [mu](const Box& b) {
        const IntervalVec x = b.as_intervals();
        const Interval f2 = mu * ((1.0 - square(x[0])) * x[1]) - x[0];
        return IntervalVec{x[1], f2};
    };
    s.output_interval = [](const Box& b) { return IntervalVec{b.as_intervals()[0]}; };
    return s;
}

// Linear system dx = F x, y = H x. Admits an exact observer transformation
// through the Sylvester relation, which makes it the zero-residual
// regression target for the whole pipeline.
inline SystemModel linear_system(const DenseMatrix& f, const DenseMatrix& h,
                                 const std::string& name = "linear") {
    SystemModel s;
    s.name = name;
    s.n_x = f.rows;
    s.n_y = h.rows;
    s.drift = [f](const Vec& x) { return matvec(f, x); };
    s.output = [h](const Vec& x) { return matvec(h, x); };
    s.drift_interval = [f](const Box& b) { return matvec(f, b.as_intervals()); };
    s.output_interval = [h](const Box& b) { return matvec(h, b.as_intervals()); };
    return s;
}

// Undamped oscillator used as the built-in linear benchmark.
inline SystemModel linear_oscillator() {
    DenseMatrix f(2, 2), h(1, 2);
    f(0, 1) = 1.0;
    f(1, 0) = -1.0;
    h(0, 0) = 1.0;
    return linear_system(f, h, "linear_osc");
}

inline SystemModel make_system(const std::string& name, double mu = 1.0) {
    if (name == "reverse_duffing") return reverse_duffing();
    if (name == "van_der_pol") return van_der_pol(mu);
    if (name == "linear_osc") return linear_oscillator();
    throw config_error("unknown system: " + name);
}

// Uniformly sampled trajectory. Sample k sits at time t0 + k*dt.
struct Trajectory {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<Vec> states;
    std::vector<Vec> outputs;  // optional, may be empty

    std::size_t size() const { return states.size(); }
    double time_at(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
};

namespace detail {

inline void rk4_step(const std::function<Vec(const Vec&)>& f, Vec& x, double dt,
                     Vec& k1, Vec& k2, Vec& k3, Vec& k4, Vec& tmp) {
    const std::size_t n = x.size();
    k1 = f(x);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
    k2 = f(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
    k3 = f(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
    k4 = f(tmp);
    for (std::size_t i = 0; i < n; ++i)
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

}  // namespace detail

// Classical fixed-step RK4 over n_steps steps of a generic vector field.
// Throws integration_diverged when a state goes non-finite or escapes the
// guard box.
inline Trajectory integrate_field(const std::function<Vec(const Vec&)>& field, const Vec& x0,
                                  double dt, long n_steps, const Box* guard = nullptr) {
    if (dt <= 0.0) throw config_error("integrate: dt must be positive");
    if (n_steps < 1) throw config_error("integrate: n_steps must be >= 1");
    Trajectory traj;
    traj.t0 = 0.0;
    traj.dt = dt;
    traj.states.reserve(static_cast<std::size_t>(n_steps) + 1);
    Vec x = x0;
    traj.states.push_back(x);
    Vec k1, k2, k3, k4, tmp(x.size());
    for (long k = 0; k < n_steps; ++k) {
        detail::rk4_step(field, x, dt, k1, k2, k3, k4, tmp);
        if (!all_finite(x)) throw integration_diverged("non-finite state", k + 1);
        if (guard && !guard->contains(x)) throw integration_diverged("state left guard box", k + 1);
        traj.states.push_back(x);
    }
    return traj;
}

inline Trajectory integrate_forward(const SystemModel& system, const Vec& x0, double dt,
                                    long n_steps, const Box* guard = nullptr) {
    Trajectory traj = integrate_field(system.drift, x0, dt, n_steps, guard);
    traj.outputs.reserve(traj.states.size());
    for (const Vec& x : traj.states) traj.outputs.push_back(system.output(x));
    return traj;
}

// Integrates dx = -f(x) forward and reverses the sample order, so the result
// is indexed by tau in {-n_steps*dt, ..., 0} with the final sample at x0.
inline Trajectory integrate_backward(const SystemModel& system, const Vec& x0, double dt,
                                     long n_steps, const Box* guard = nullptr) {
    auto reversed = [&system](const Vec& x) {
        Vec v = system.drift(x);
        for (double& c : v) c = -c;
        return v;
    };
    Trajectory traj = integrate_field(reversed, x0, dt, n_steps, guard);
    std::reverse(traj.states.begin(), traj.states.end());
    traj.t0 = -static_cast<double>(n_steps) * dt;
    traj.outputs.reserve(traj.states.size());
    for (const Vec& x : traj.states) traj.outputs.push_back(system.output(x));
    return traj;
}

// Uniform i.i.d. samples from a box, deterministic under the seed.
inline std::vector<Vec> sample_box(const Box& box, long count, std::uint64_t seed) {
    if (count < 1) throw config_error("sample_box: count must be >= 1");
    Rng rng(seed);
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long k = 0; k < count; ++k) {
        Vec x(box.lower.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * uniform01(rng);
        out.push_back(std::move(x));
    }
    return out;
}

// CSV export: t,x1,...,xn[,y1,...,ym], 17 significant digits.
inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open " + path);
    const std::size_t nx = traj.states.empty() ? 0 : traj.states[0].size();
    const std::size_t ny = traj.outputs.empty() ? 0 : traj.outputs[0].size();
    out << "t";
    for (std::size_t i = 1; i <= nx; ++i) out << ",x" << i;
    for (std::size_t i = 1; i <= ny; ++i) out << ",y" << i;
    out << "\n";
    char buf[40];
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", traj.time_at(k));
        out << buf;
        for (double v : traj.states[k]) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << ',' << buf;
        }
        if (!traj.outputs.empty())
            for (double v : traj.outputs[k]) {
                std::snprintf(buf, sizeof(buf), "%.17g", v);
                out << ',' << buf;
            }
        out << "\n";
    }
}

}  // namespace kkl
