#pragma once

// Assembles the learned observer: PDE residual of the forward map, joint
// plant/observer simulation with optional bounded measurement noise, and
// the empirical error envelope used to validate certificates.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kkl/dynamics.hpp"
#include "kkl/linalg.hpp"
#include "kkl/net.hpp"
#include "kkl/parallel.hpp"
#include "kkl/rng.hpp"

namespace kkl {

struct LearnedObserver {
    ObserverDesign design;
    Mlp forward_net;  // state -> observer coordinates
    Mlp inverse_net;  // observer coordinates -> state estimate
    Vec z0_policy;    // observer initial condition, defaults to 0

    int n_x() const { return forward_net.input_dim(); }
    int n_z() const { return design.nz(); }

    Vec z0() const { return z0_policy.empty() ? Vec(n_z(), 0.0) : z0_policy; }
};

inline void validate_observer(const LearnedObserver& obs) {
    if (obs.forward_net.output_dim() != obs.design.nz())
        throw config_error("observer: forward net output dim != n_z");
    if (obs.inverse_net.input_dim() != obs.design.nz())
        throw config_error("observer: inverse net input dim != n_z");
    if (obs.inverse_net.output_dim() != obs.forward_net.input_dim())
        throw config_error("observer: inverse net output dim != n_x");
    if (!obs.z0_policy.empty() && static_cast<int>(obs.z0_policy.size()) != obs.design.nz())
        throw config_error("observer: z0 dimension mismatch");
}

// Bounded measurement noise: per-component uniform draws on [-vbar, vbar],
// rescaled onto the ball so every realization satisfies ||v|| <= vbar, held
// constant across each integration step.
struct NoiseSpec {
    double vbar = 0.0;
    std::uint64_t seed = 0;
};

inline Vec draw_noise(const NoiseSpec& noise, int n_y, Rng& rng) {
    Vec v(n_y, 0.0);
    if (noise.vbar <= 0.0) return v;
    for (double& c : v) c = uniform(rng, -noise.vbar, noise.vbar);
    const double n = norm2(v);
    if (n > noise.vbar)
        for (double& c : v) c *= noise.vbar / n;
    return v;
}

// PDE residual R(x) = (d T/dx)(x) f(x) - A T(x) - B h(x), evaluated through
// the forward-tangent pass so the Jacobian-vector product is exact.
inline Vec pde_residual(const LearnedObserver& obs, const SystemModel& system, const Vec& x) {
    TangentCache cache;
    forward_tangent(obs.forward_net, x, system.drift(x), cache);
    const Vec zhat = cache.a.back();
    const Vec jf = cache.t.back();
    Vec r = jf - matvec(obs.design.A, zhat);
    const Vec bh = matvec(obs.design.B, system.output(x));
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= bh[i];
    return r;
}

// Joint simulation record. states/zhat are sampled every `stride` steps;
// noises[k] is the measurement error applied on the step leaving sample k
// (only meaningful at stride 1).
struct ObserverRun {
    double dt = 0.0;
    long stride = 1;
    std::vector<Vec> states;     // plant x
    std::vector<Vec> zhat;       // observer coordinates
    std::vector<Vec> estimates;  // inverse_net(zhat)
    std::vector<Vec> noises;
    Vec errors;                  // ||estimate - state|| per sample

    double sample_dt() const { return dt * static_cast<double>(stride); }
    std::size_t size() const { return states.size(); }
    double time_at(std::size_t k) const { return sample_dt() * static_cast<double>(k); }
};

// Co-integrates plant and observer with RK4 on the joint state; the noise is
// zero-order held across the four stages of each step.
inline ObserverRun simulate_observer(const LearnedObserver& obs, const SystemModel& system,
                                     const Vec& x0, double dt, double horizon,
                                     const NoiseSpec& noise = {}, long stride = 1,
                                     const Box* guard = nullptr) {
    if (dt <= 0.0 || horizon <= 0.0) throw config_error("simulate_observer: bad dt/horizon");
    if (stride < 1) throw config_error("simulate_observer: stride must be >= 1");
    const long n_steps = static_cast<long>(std::llround(horizon / dt));
    const int nx = system.n_x, nz = obs.design.nz();

    ObserverRun run;
    run.dt = dt;
    run.stride = stride;
    Rng rng(noise.seed);

    Vec x = x0;
    Vec z = obs.z0();
    Vec v(system.n_y, 0.0);
    auto joint_field = [&](const Vec& s) {
        const Vec xs(s.begin(), s.begin() + nx);
        Vec d(nx + nz);
        const Vec fx = system.drift(xs);
        std::copy(fx.begin(), fx.end(), d.begin());
        Vec y = system.output(xs);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += v[i];
        const Vec zs(s.begin() + nx, s.end());
        Vec dz = matvec(obs.design.A, zs);
        const Vec by = matvec(obs.design.B, y);
        for (int i = 0; i < nz; ++i) d[nx + i] = dz[i] + by[i];
        return d;
    };

    Vec joint(nx + nz);
    std::copy(x.begin(), x.end(), joint.begin());
    std::copy(z.begin(), z.end(), joint.begin() + nx);
    Vec k1, k2, k3, k4, tmp(joint.size());

    auto record = [&](const Vec& s, const Vec& applied_noise) {
        Vec xs(s.begin(), s.begin() + nx);
        Vec zs(s.begin() + nx, s.end());
        Vec est = forward(obs.inverse_net, zs);
        run.errors.push_back(norm2(est - xs));
        run.states.push_back(std::move(xs));
        run.zhat.push_back(std::move(zs));
        run.estimates.push_back(std::move(est));
        run.noises.push_back(applied_noise);
    };

    v = draw_noise(noise, system.n_y, rng);
    record(joint, v);
    for (long k = 0; k < n_steps; ++k) {
        detail::rk4_step(joint_field, joint, dt, k1, k2, k3, k4, tmp);
        if (!all_finite(joint)) throw integration_diverged("non-finite joint state", k + 1);
        if (guard) {
            const Vec xs(joint.begin(), joint.begin() + nx);
            if (!guard->contains(xs)) throw integration_diverged("state left guard box", k + 1);
        }
        const Vec applied = v;
        v = draw_noise(noise, system.n_y, rng);  // value for the next step
        if ((k + 1) % stride == 0 || k + 1 == n_steps) record(joint, v);
        (void)applied;
    }
    return run;
}

// e_z(t) = zhat(t) - T_theta(x(t)) at every stored sample.
inline std::vector<Vec> observer_coordinate_errors(const LearnedObserver& obs,
                                                   const ObserverRun& run) {
    std::vector<Vec> ez;
    ez.reserve(run.size());
    for (std::size_t k = 0; k < run.size(); ++k)
        ez.push_back(run.zhat[k] - forward(obs.forward_net, run.states[k]));
    return ez;
}

// Trapezoid-consistency defect of the error dynamics de_z = A e_z - R(x) + B v
// over each step interval, using the held noise value at both interval ends.
// For an exact simulation the maximum defect is O(dt^2). Requires stride 1.
inline double error_dynamics_defect(const LearnedObserver& obs, const SystemModel& system,
                                    const ObserverRun& run) {
    if (run.stride != 1) throw config_error("error_dynamics_defect: needs stride-1 run");
    const std::vector<Vec> ez = observer_coordinate_errors(obs, run);
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < run.size(); ++k) {
        auto rhs = [&](std::size_t j) {
            Vec r = matvec(obs.design.A, ez[j]) - pde_residual(obs, system, run.states[j]);
            const Vec bv = matvec(obs.design.B, run.noises[k]);
            for (std::size_t i = 0; i < r.size(); ++i) r[i] += bv[i];
            return r;
        };
        const Vec r0 = rhs(k), r1 = rhs(k + 1);
        Vec defect = ez[k + 1] - ez[k];
        for (std::size_t i = 0; i < defect.size(); ++i)
            defect[i] = defect[i] / run.dt - 0.5 * (r0[i] + r1[i]);
        worst = std::max(worst, norm2(defect));
    }
    return worst;
}

struct EnvelopeResult {
    double envelope = 0.0;   // max over trajectories of sup_{t >= t_cut} error
    long diverged = 0;       // trajectories excluded due to integration failure
    long n_trajectories = 0;
};

// Worst post-transient estimation error over randomly drawn initial
// conditions. Per-trajectory noise seeds are split from the master seed, so
// the result does not depend on scheduling.
inline EnvelopeResult empirical_error_envelope(
    const LearnedObserver& obs, const SystemModel& system,
    const std::function<Vec(Rng&)>& draw_x0, long n_trajectories, double dt, double horizon,
    double t_cut, const NoiseSpec& noise = {}, std::uint64_t seed = 0, long stride = 1,
    int threads = 1) {
    if (n_trajectories < 1) throw config_error("envelope: need at least one trajectory");
    std::vector<double> sup(n_trajectories, -1.0);  // -1 marks divergence
    parallel_chunks(n_trajectories, 4, threads, [&](long, long begin, long end) {
        for (long i = begin; i < end; ++i) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
            const Vec x0 = draw_x0(rng);
            NoiseSpec traj_noise = noise;
            traj_noise.seed = derive_seed(seed ^ 0x6e6f697365ull, static_cast<std::uint64_t>(i));
            try {
                const ObserverRun run =
                    simulate_observer(obs, system, x0, dt, horizon, traj_noise, stride);
                double s = 0.0;
                for (std::size_t k = 0; k < run.size(); ++k)
                    if (run.time_at(k) >= t_cut) s = std::max(s, run.errors[k]);
                sup[i] = s;
            } catch (const integration_diverged&) {
                sup[i] = -1.0;
            }
        }
    });
    EnvelopeResult res;
    res.n_trajectories = n_trajectories;
    for (double s : sup) {
        if (s < 0.0)
            ++res.diverged;
        else
            res.envelope = std::max(res.envelope, s);
    }
    if (res.diverged == res.n_trajectories)
        throw numeric_error("envelope: every trajectory diverged");
    return res;
}

// Error-series CSV: t,err[,err_z]
inline void write_error_csv(const LearnedObserver& obs, const ObserverRun& run,
                            const std::string& path, bool with_ez = false) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open " + path);
    out << (with_ez ? "t,err,err_z\n" : "t,err\n");
    std::vector<Vec> ez;
    if (with_ez) ez = observer_coordinate_errors(obs, run);
    char buf[40];
    for (std::size_t k = 0; k < run.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", run.time_at(k));
        out << buf;
        std::snprintf(buf, sizeof(buf), "%.17g", run.errors[k]);
        out << ',' << buf;
        if (with_ez) {
            std::snprintf(buf, sizeof(buf), "%.17g", norm2(ez[k]));
            out << ',' << buf;
        }
        out << "\n";
    }
}

}  // namespace kkl
