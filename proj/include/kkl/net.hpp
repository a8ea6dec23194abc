#pragma once

// Dense feed-forward network with tanh hidden activations and exact
// reverse-mode gradients. Besides plain backprop, the module provides a
// forward-tangent pass (JVP along a direction v) together with reverse
// differentiation THROUGH that pass, which is what the gradient of a
// PDE-residual term needs: d/dtheta of (d net/dx)(x) v.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "kkl/errors.hpp"
#include "kkl/linalg.hpp"
#include "kkl/rng.hpp"

#include <json.hpp>

namespace kkl {

struct Mlp {
    std::vector<int> layer_dims;        // [d0, ..., dL]
    std::vector<DenseMatrix> weights;   // W[k]: dims[k+1] x dims[k]
    std::vector<Vec> biases;

    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
    int n_layers() const { return static_cast<int>(weights.size()); }

    std::size_t n_params() const {
        std::size_t n = 0;
        for (int k = 0; k < n_layers(); ++k) n += weights[k].a.size() + biases[k].size();
        return n;
    }
};

inline Mlp make_mlp(const std::vector<int>& layer_dims) {
    if (layer_dims.size() < 2) throw config_error("mlp: need at least input and output dims");
    Mlp net;
    net.layer_dims = layer_dims;
    for (std::size_t k = 0; k + 1 < layer_dims.size(); ++k) {
        net.weights.emplace_back(layer_dims[k + 1], layer_dims[k]);
        net.biases.emplace_back(layer_dims[k + 1], 0.0);
    }
    return net;
}

// Xavier-uniform weights, zero biases.
inline Mlp make_mlp_xavier(const std::vector<int>& layer_dims, std::uint64_t seed) {
    Mlp net = make_mlp(layer_dims);
    Rng rng(seed);
    for (int k = 0; k < net.n_layers(); ++k) {
        const double limit = std::sqrt(6.0 / (layer_dims[k] + layer_dims[k + 1]));
        for (double& w : net.weights[k].a) w = uniform(rng, -limit, limit);
    }
    return net;
}

// --- flat parameter view (optimizers work on one contiguous vector) ---

inline Vec get_params(const Mlp& net) {
    Vec p;
    p.reserve(net.n_params());
    for (int k = 0; k < net.n_layers(); ++k) {
        p.insert(p.end(), net.weights[k].a.begin(), net.weights[k].a.end());
        p.insert(p.end(), net.biases[k].begin(), net.biases[k].end());
    }
    return p;
}

inline void set_params(Mlp& net, const Vec& p) {
    if (p.size() != net.n_params()) throw config_error("set_params: size mismatch");
    std::size_t off = 0;
    for (int k = 0; k < net.n_layers(); ++k) {
        std::copy(p.begin() + off, p.begin() + off + net.weights[k].a.size(),
                  net.weights[k].a.begin());
        off += net.weights[k].a.size();
        std::copy(p.begin() + off, p.begin() + off + net.biases[k].size(),
                  net.biases[k].begin());
        off += net.biases[k].size();
    }
}

// --- forward passes ---

inline Vec forward(const Mlp& net, const Vec& x) {
    if (static_cast<int>(x.size()) != net.input_dim())
        throw config_error("forward: input dimension mismatch");
    Vec a = x;
    for (int k = 0; k < net.n_layers(); ++k) {
        Vec s = matvec(net.weights[k], a);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += net.biases[k][i];
        if (k + 1 < net.n_layers())
            for (double& v : s) v = std::tanh(v);
        a = std::move(s);
    }
    return a;
}

// Activations a^0..a^L (post-tanh on hidden layers, affine on the last).
struct ForwardCache {
    std::vector<Vec> a;
};

inline const Vec& forward_cached(const Mlp& net, const Vec& x, ForwardCache& cache) {
    cache.a.assign(1, x);
    for (int k = 0; k < net.n_layers(); ++k) {
        Vec s = matvec(net.weights[k], cache.a.back());
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += net.biases[k][i];
        if (k + 1 < net.n_layers())
            for (double& v : s) v = std::tanh(v);
        cache.a.push_back(std::move(s));
    }
    return cache.a.back();
}

// Joint forward/tangent pass: propagates x together with a direction v, so
// t^L equals (d net/dx)(x) v. u^k keeps the pre-activation tangents needed
// by the reverse sweep.
struct TangentCache {
    std::vector<Vec> a;  // activations a^0..a^L
    std::vector<Vec> t;  // tangents t^0..t^L
    std::vector<Vec> u;  // pre-activation tangents u^1..u^L (index shifted by 1)
};

inline void forward_tangent(const Mlp& net, const Vec& x, const Vec& v, TangentCache& cache) {
    cache.a.assign(1, x);
    cache.t.assign(1, v);
    cache.u.clear();
    for (int k = 0; k < net.n_layers(); ++k) {
        Vec s = matvec(net.weights[k], cache.a.back());
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += net.biases[k][i];
        Vec u = matvec(net.weights[k], cache.t.back());
        if (k + 1 < net.n_layers()) {
            Vec t(s.size());
            for (std::size_t i = 0; i < s.size(); ++i) {
                s[i] = std::tanh(s[i]);
                t[i] = (1.0 - s[i] * s[i]) * u[i];
            }
            cache.a.push_back(std::move(s));
            cache.t.push_back(std::move(t));
        } else {
            cache.a.push_back(std::move(s));
            cache.t.push_back(u);
        }
        cache.u.push_back(std::move(u));
    }
}

// Exact input Jacobian J = W_L D_{L-1} W_{L-1} ... D_1 W_1 by forward
// accumulation; D_k = diag(1 - a_k^2).
inline DenseMatrix input_jacobian(const Mlp& net, const Vec& x) {
    ForwardCache cache;
    forward_cached(net, x, cache);
    DenseMatrix j = net.weights[0];
    for (int k = 1; k < net.n_layers(); ++k) {
        // scale rows of j by tanh' at layer k activations, then multiply
        DenseMatrix scaled = j;
        const Vec& a = cache.a[k];
        for (int i = 0; i < scaled.rows; ++i) {
            const double d = 1.0 - a[i] * a[i];
            for (int c = 0; c < scaled.cols; ++c) scaled(i, c) *= d;
        }
        j = matmul(net.weights[k], scaled);
    }
    return j;
}

// Gradient accumulator matching the get_params layout.
struct GradBuffer {
    Vec g;

    explicit GradBuffer(const Mlp& net) : g(net.n_params(), 0.0) {}
    void reset() { std::fill(g.begin(), g.end(), 0.0); }
    void add_scaled(const GradBuffer& other, double s) { axpy(s, other.g, g); }
};

namespace detail {

struct ParamOffsets {
    std::vector<std::size_t> w_off, b_off;

    explicit ParamOffsets(const Mlp& net) {
        std::size_t off = 0;
        for (int k = 0; k < net.n_layers(); ++k) {
            w_off.push_back(off);
            off += net.weights[k].a.size();
            b_off.push_back(off);
            off += net.biases[k].size();
        }
    }
};

}  // namespace detail

// Standard reverse pass: accumulates d(out_bar . net(x))/dtheta into grad,
// returns the input cotangent.
inline Vec backprop(const Mlp& net, const ForwardCache& cache, const Vec& out_bar,
                    GradBuffer& grad) {
    const detail::ParamOffsets off(net);
    Vec a_bar = out_bar;
    for (int k = net.n_layers() - 1; k >= 0; --k) {
        // s_bar for the affine layer output (last layer: identity activation)
        Vec s_bar = a_bar;
        if (k + 1 < net.n_layers()) {
            const Vec& a = cache.a[k + 1];
            for (std::size_t i = 0; i < s_bar.size(); ++i)
                s_bar[i] *= 1.0 - a[i] * a[i];
        }
        const Vec& a_prev = cache.a[k];
        double* wg = &grad.g[off.w_off[k]];
        const int rows = net.weights[k].rows, cols = net.weights[k].cols;
        for (int i = 0; i < rows; ++i) {
            const double sb = s_bar[i];
            if (sb != 0.0)
                for (int j = 0; j < cols; ++j) wg[i * cols + j] += sb * a_prev[j];
        }
        double* bg = &grad.g[off.b_off[k]];
        for (int i = 0; i < rows; ++i) bg[i] += s_bar[i];
        // propagate
        Vec prev_bar(cols, 0.0);
        for (int i = 0; i < rows; ++i) {
            const double sb = s_bar[i];
            if (sb != 0.0) {
                const double* row = &net.weights[k].a[static_cast<std::size_t>(i) * cols];
                for (int j = 0; j < cols; ++j) prev_bar[j] += sb * row[j];
            }
        }
        a_bar = std::move(prev_bar);
    }
    return a_bar;
}

// Reverse pass over the joint forward/tangent computation. Given cotangents
// a_bar for the primal output a^L and t_bar for the tangent output t^L,
// accumulates the parameter gradient of phi(a^L, t^L). This differentiates
// the JVP with respect to the parameters (reverse-over-forward).
//
// Per hidden layer, with d = 1 - a^2 and t = d .* u:
//   s_bar += d .* a_bar - 2 a .* d .* u .* t_bar
//   u_bar  = d .* t_bar
//   grad W += s_bar a_prev^T + u_bar t_prev^T,  grad b += s_bar
inline void backprop_tangent(const Mlp& net, const TangentCache& cache, const Vec& out_a_bar,
                             const Vec& out_t_bar, GradBuffer& grad) {
    const detail::ParamOffsets off(net);
    Vec a_bar = out_a_bar;
    Vec t_bar = out_t_bar;
    for (int k = net.n_layers() - 1; k >= 0; --k) {
        Vec s_bar, u_bar;
        if (k + 1 < net.n_layers()) {
            const Vec& a = cache.a[k + 1];
            const Vec& u = cache.u[k];
            s_bar.resize(a.size());
            u_bar.resize(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                const double d = 1.0 - a[i] * a[i];
                s_bar[i] = d * a_bar[i] - 2.0 * a[i] * d * u[i] * t_bar[i];
                u_bar[i] = d * t_bar[i];
            }
        } else {
            s_bar = a_bar;
            u_bar = t_bar;
        }
        const Vec& a_prev = cache.a[k];
        const Vec& t_prev = cache.t[k];
        double* wg = &grad.g[off.w_off[k]];
        const int rows = net.weights[k].rows, cols = net.weights[k].cols;
        for (int i = 0; i < rows; ++i) {
            const double sb = s_bar[i], ub = u_bar[i];
            double* row = wg + static_cast<std::size_t>(i) * cols;
            for (int j = 0; j < cols; ++j) row[j] += sb * a_prev[j] + ub * t_prev[j];
        }
        double* bg = &grad.g[off.b_off[k]];
        for (int i = 0; i < rows; ++i) bg[i] += s_bar[i];
        Vec prev_a_bar(cols, 0.0), prev_t_bar(cols, 0.0);
        for (int i = 0; i < rows; ++i) {
            const double* row = &net.weights[k].a[static_cast<std::size_t>(i) * cols];
            const double sb = s_bar[i], ub = u_bar[i];
            for (int j = 0; j < cols; ++j) {
                prev_a_bar[j] += sb * row[j];
                prev_t_bar[j] += ub * row[j];
            }
        }
        a_bar = std::move(prev_a_bar);
        t_bar = std::move(prev_t_bar);
    }
}

// Mean squared supervised loss (1/N) sum ||net(x_i) - z_i||^2 over an index
// range; accumulates the exact gradient, returns the loss.
inline double supervised_loss_grad(const Mlp& net, const std::vector<Vec>& xs,
                                   const std::vector<Vec>& zs, const std::vector<long>& index,
                                   GradBuffer& grad) {
    if (index.empty()) throw config_error("supervised_loss_grad: empty batch");
    ForwardCache cache;
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(index.size());
    for (long idx : index) {
        const Vec& out = forward_cached(net, xs[idx], cache);
        Vec r(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            r[i] = out[i] - zs[idx][i];
            loss += r[i] * r[i] * inv_n;
        }
        for (double& v : r) v *= 2.0 * inv_n;
        backprop(net, cache, r, grad);
    }
    return loss;
}

// --- Adam ---

struct AdamConfig {
    double rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Vec m;
    Vec v;
    long step = 0;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

inline void adam_step(AdamState& state, const AdamConfig& cfg, Vec& params, const Vec& grad) {
    if (grad.size() != params.size() || state.m.size() != params.size())
        throw config_error("adam_step: size mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= cfg.rate * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

// --- serialization ---

inline nlohmann::json mlp_to_json(const Mlp& net, std::uint64_t seed = 0,
                                  const std::string& config_digest = "") {
    nlohmann::json j;
    j["layer_dims"] = net.layer_dims;
    j["activation"] = "tanh";
    j["weights"] = nlohmann::json::array();
    j["biases"] = nlohmann::json::array();
    for (int k = 0; k < net.n_layers(); ++k) {
        j["weights"].push_back(net.weights[k].a);
        j["biases"].push_back(net.biases[k]);
    }
    j["seed"] = seed;
    j["training_config_digest"] = config_digest;
    return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
    if (j.value("activation", "tanh") != std::string("tanh"))
        throw config_error("model: unsupported activation");
    Mlp net = make_mlp(j.at("layer_dims").get<std::vector<int>>());
    const auto& ws = j.at("weights");
    const auto& bs = j.at("biases");
    if (static_cast<int>(ws.size()) != net.n_layers() ||
        static_cast<int>(bs.size()) != net.n_layers())
        throw config_error("model: layer count mismatch");
    for (int k = 0; k < net.n_layers(); ++k) {
        const Vec w = ws[k].get<Vec>();
        const Vec b = bs[k].get<Vec>();
        if (w.size() != net.weights[k].a.size() || b.size() != net.biases[k].size())
            throw config_error("model: shape mismatch at layer " + std::to_string(k));
        net.weights[k].a = w;
        net.biases[k] = b;
    }
    for (int k = 0; k < net.n_layers(); ++k)
        if (!all_finite(net.weights[k].a) || !all_finite(net.biases[k]))
            throw config_error("model: non-finite parameters");
    return net;
}

inline void save_mlp(const Mlp& net, const std::string& path, std::uint64_t seed = 0,
                     const std::string& config_digest = "") {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open " + path);
    out << mlp_to_json(net, seed, config_digest).dump(2) << "\n";
}

inline Mlp load_mlp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return mlp_from_json(j);
}

}  // namespace kkl
