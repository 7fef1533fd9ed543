#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "regimeml/model.hpp"

namespace regimeml {

struct OptimizeOptions {
    double grad_tol = 1e-6;  // infinity norm of the gradient
    double step_tol = 1e-9;  // euclidean step length
    int max_iterations = 500;
    int max_halvings = 40;
    double armijo_c1 = 1e-4;
    // When set, iteration stops at the first iterate with f <= stop_below
    // (used to produce deliberately early-stopped estimates).
    bool has_stop_below = false;
    double stop_below = 0.0;
};

struct OptimizeResult {
    Vector x;
    double f = 0.0;
    Vector grad;
    double grad_inf_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    bool used_nelder_mead = false;
    bool stopped_early = false;
    int line_search_failures = 0;
    std::string message;
};

namespace detail {

/// Nelder-Mead simplex minimization; fallback when line searches fail.
inline OptimizeResult nelder_mead_minimize(const std::function<double(const Vector&)>& f,
                                           const Vector& x0, int max_iterations) {
    const double refl = 1.0, expa = 2.0, contr = 0.5, shrink = 0.5;
    int p = static_cast<int>(x0.size());
    std::vector<Vector> xs(static_cast<std::size_t>(p + 1), x0);
    std::vector<double> fs(static_cast<std::size_t>(p + 1));
    for (int i = 0; i < p; ++i)
        xs[static_cast<std::size_t>(i + 1)](i) += 0.05 * std::max(1.0, std::abs(x0(i)));
    for (int i = 0; i <= p; ++i) fs[static_cast<std::size_t>(i)] = f(xs[static_cast<std::size_t>(i)]);

    OptimizeResult out;
    auto order = [&] {
        for (std::size_t i = 1; i < xs.size(); ++i) {
            Vector x = xs[i];
            double fx = fs[i];
            std::size_t j = i;
            while (j > 0 && fs[j - 1] > fx) {
                xs[j] = xs[j - 1];
                fs[j] = fs[j - 1];
                --j;
            }
            xs[j] = x;
            fs[j] = fx;
        }
    };
    order();
    int iter = 0;
    for (; iter < max_iterations; ++iter) {
        double spread = fs.back() - fs.front();
        double diam = 0.0;
        for (int i = 1; i <= p; ++i)
            diam = std::max(diam, (xs[static_cast<std::size_t>(i)] - xs[0]).norm());
        if (spread < 1e-10 * (1.0 + std::abs(fs[0])) && diam < 1e-8) {
            out.converged = true;
            break;
        }
        Vector centroid = Vector::Zero(p);
        for (int i = 0; i < p; ++i) centroid += xs[static_cast<std::size_t>(i)];
        centroid /= static_cast<double>(p);
        Vector xr = centroid + refl * (centroid - xs.back());
        double fr = f(xr);
        if (fr < fs[0]) {
            Vector xe = centroid + expa * (xr - centroid);
            double fe = f(xe);
            if (fe < fr) {
                xs.back() = xe;
                fs.back() = fe;
            } else {
                xs.back() = xr;
                fs.back() = fr;
            }
        } else if (fr < fs[static_cast<std::size_t>(p - 1)]) {
            xs.back() = xr;
            fs.back() = fr;
        } else {
            bool outside = fr < fs.back();
            Vector xc = outside ? Vector(centroid + contr * (xr - centroid))
                                : Vector(centroid - contr * (centroid - xs.back()));
            double fc = f(xc);
            if (fc < std::min(fr, fs.back())) {
                xs.back() = xc;
                fs.back() = fc;
            } else {
                for (int i = 1; i <= p; ++i) {
                    xs[static_cast<std::size_t>(i)] =
                        xs[0] + shrink * (xs[static_cast<std::size_t>(i)] - xs[0]);
                    fs[static_cast<std::size_t>(i)] = f(xs[static_cast<std::size_t>(i)]);
                }
            }
        }
        order();
    }
    out.x = xs[0];
    out.f = fs[0];
    out.iterations = iter;
    out.used_nelder_mead = true;
    out.message = out.converged ? "nelder-mead simplex converged" : "nelder-mead iteration cap";
    return out;
}

}  // namespace detail

/// BFGS minimization with Armijo backtracking. After two line-search
/// failures the search restarts as a Nelder-Mead simplex from the best point
/// found. Throws if the objective is non-finite at x0.
inline OptimizeResult bfgs_minimize(const std::function<double(const Vector&)>& f,
                                    const std::function<Vector(const Vector&)>& grad,
                                    const Vector& x0, const OptimizeOptions& opts = {}) {
    int p = static_cast<int>(x0.size());
    Vector x = x0;
    double fx = f(x);
    if (!std::isfinite(fx))
        throw std::runtime_error("bfgs_minimize: objective not finite at the starting point");
    Vector g = grad(x);
    Matrix H = Matrix::Identity(p, p);

    OptimizeResult out;
    int lsfail = 0;
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        out.iterations = iter;
        if (opts.has_stop_below && fx <= opts.stop_below) {
            out.converged = true;
            out.stopped_early = true;
            out.message = "stopped at objective target";
            break;
        }
        double gnorm = g.cwiseAbs().maxCoeff();
        if (gnorm < opts.grad_tol) {
            out.converged = true;
            out.message = "gradient tolerance reached";
            break;
        }
        Vector dir = -(H * g);
        if (dir.dot(g) >= 0.0) {
            H = Matrix::Identity(p, p);
            dir = -g;
        }
        double slope = g.dot(dir);
        double alpha = 1.0;
        double fnew = 0.0;
        bool accepted = false;
        for (int h = 0; h < opts.max_halvings; ++h) {
            fnew = f(x + alpha * dir);
            if (std::isfinite(fnew) && fnew <= fx + opts.armijo_c1 * alpha * slope) {
                accepted = true;
                break;
            }
            alpha /= 2.0;
        }
        if (!accepted) {
            ++lsfail;
            out.line_search_failures = lsfail;
            if (lsfail >= 2) {
                OptimizeResult nm = detail::nelder_mead_minimize(f, x, 400 * std::max(p, 4));
                nm.grad = grad(nm.x);
                nm.grad_inf_norm = nm.grad.cwiseAbs().maxCoeff();
                nm.iterations += iter;
                nm.line_search_failures = lsfail;
                return nm;
            }
            H = Matrix::Identity(p, p);
            continue;
        }
        Vector s = alpha * dir;
        Vector xnew = x + s;
        Vector gnew = grad(xnew);
        Vector y = gnew - g;
        double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            // Inverse-Hessian BFGS update.
            double rho = 1.0 / sy;
            Matrix I = Matrix::Identity(p, p);
            H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
                rho * s * s.transpose();
        }
        x = xnew;
        fx = fnew;
        g = gnew;
        if (s.norm() < opts.step_tol) {
            out.converged = true;
            out.message = "step tolerance reached";
            break;
        }
    }
    if (out.message.empty())
        out.message = out.converged ? "converged" : "iteration cap reached";
    out.x = x;
    out.f = fx;
    out.grad = g;
    out.grad_inf_norm = g.cwiseAbs().maxCoeff();
    return out;
}

}  // namespace regimeml
