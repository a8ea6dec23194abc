#pragma once

// Limited-memory BFGS with a strong-Wolfe line search (two-loop recursion,
// bracket + zoom). Works on flat parameter vectors; the closure returns the
// loss and fills the gradient.

#include <cmath>
#include <deque>
#include <functional>
#include <vector>

#include "kkl/linalg.hpp"

namespace kkl {

struct LbfgsOptions {
    int memory = 10;
    double c1 = 1e-4;          // sufficient decrease
    double c2 = 0.9;           // curvature
    int max_line_search = 25;  // function evaluations per search
    double grad_tol = 1e-8;
    int max_iters = 100;
};

struct LbfgsResult {
    Vec params;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;          // gradient norm hit tolerance
    bool line_search_failed = false; // stopped early, params = last accepted
};

using LossClosure = std::function<double(const Vec&, Vec&)>;

namespace detail {

struct WolfeSearch {
    const LossClosure& f;
    const Vec& x0;
    const Vec& dir;
    double f0, g0;  // value and directional derivative at alpha = 0
    double c1, c2;
    int evals_left;

    Vec xt, gt;  // scratch: trial point and its gradient
    double f_at = 0.0, g_at = 0.0;

    bool eval(double alpha) {
        if (evals_left-- <= 0) return false;
        xt = x0;
        axpy(alpha, dir, xt);
        f_at = f(xt, gt);
        g_at = dot(gt, dir);
        return true;
    }

    bool armijo(double alpha) const { return f_at <= f0 + c1 * alpha * g0; }
    bool curvature() const { return std::abs(g_at) <= -c2 * g0; }

    // Returns accepted alpha, or 0 on failure.
    double run() {
        double alpha_prev = 0.0, f_prev = f0, g_prev = g0;
        double alpha = 1.0;
        for (int iter = 0; evals_left > 0; ++iter) {
            if (!eval(alpha)) return 0.0;
            if (!armijo(alpha) || (iter > 0 && f_at >= f_prev))
                return zoom(alpha_prev, f_prev, g_prev, alpha, f_at, g_at);
            if (curvature()) return alpha;
            if (g_at >= 0.0) return zoom(alpha, f_at, g_at, alpha_prev, f_prev, g_prev);
            alpha_prev = alpha;
            f_prev = f_at;
            g_prev = g_at;
            alpha *= 2.0;
        }
        return 0.0;
    }

    // Safeguarded bisection zoom between a low point satisfying Armijo and a
    // bracketing high point.
    double zoom(double lo, double f_lo, double g_lo, double hi, double f_hi, double g_hi) {
        (void)f_hi;
        (void)g_hi;
        (void)g_lo;
        while (evals_left > 0) {
            if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(lo))) return 0.0;
            const double alpha = lo + 0.5 * (hi - lo);
            if (!eval(alpha)) return 0.0;
            if (!armijo(alpha) || f_at >= f_lo) {
                hi = alpha;
            } else {
                if (curvature()) return alpha;
                if (g_at * (hi - lo) >= 0.0) hi = lo;
                lo = alpha;
                f_lo = f_at;
            }
        }
        return 0.0;
    }
};

}  // namespace detail

inline LbfgsResult lbfgs_minimize(const LossClosure& loss, Vec start,
                                  const LbfgsOptions& opt = {}) {
    LbfgsResult res;
    res.params = std::move(start);
    const std::size_t n = res.params.size();
    Vec grad(n, 0.0);
    res.value = loss(res.params, grad);

    std::deque<Vec> s_hist, y_hist;
    std::deque<double> rho_hist;

    for (int iter = 0; iter < opt.max_iters; ++iter) {
        res.iterations = iter;
        if (norm2(grad) <= opt.grad_tol) {
            res.converged = true;
            return res;
        }
        // two-loop recursion
        Vec dir = grad;
        std::vector<double> alpha_mem(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            alpha_mem[i] = rho_hist[i] * dot(s_hist[i], dir);
            axpy(-alpha_mem[i], y_hist[i], dir);
        }
        if (!s_hist.empty()) {
            const double gamma =
                dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
            scale(dir, gamma);
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * dot(y_hist[i], dir);
            axpy(alpha_mem[i] - beta, s_hist[i], dir);
        }
        for (double& v : dir) v = -v;

        double dir_deriv = dot(grad, dir);
        if (dir_deriv >= 0.0) {  // safeguard: fall back to steepest descent
            dir = grad;
            for (double& v : dir) v = -v;
            dir_deriv = -dot(grad, grad);
        }

        detail::WolfeSearch search{loss,   res.params, dir, res.value,
                                   dir_deriv, opt.c1, opt.c2, opt.max_line_search};
        const double alpha = search.run();
        if (alpha == 0.0) {
            res.line_search_failed = true;
            return res;  // keep last accepted iterate
        }
        Vec x_new = res.params;
        axpy(alpha, dir, x_new);
        Vec g_new(n, 0.0);
        const double f_new = loss(x_new, g_new);

        Vec s = x_new - res.params;
        Vec y = g_new - grad;
        const double sy = dot(s, y);
        if (sy > 1e-12 * norm2(s) * norm2(y)) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opt.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        res.params = std::move(x_new);
        res.value = f_new;
        grad = std::move(g_new);
        res.iterations = iter + 1;
    }
    return res;
}

}  // namespace kkl
