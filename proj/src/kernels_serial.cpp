#include "blowup/kernels.hpp"

#include <limits>

namespace blowup::kernels::serial {

void laplacian(const Stencil& s, std::span<const double> u, std::span<double> out) {
    const double inv_h2 = 1.0 / (s.h * s.h);
    const std::size_t n = s.nx * s.ny;
    for (std::size_t i = 0; i < n; ++i) {
        if (!s.active[i]) continue;
        double acc = u[i - 1] + u[i + 1] - 2.0 * u[i];
        if (s.dim == 2) acc += u[i - s.nx] + u[i + s.nx] - 2.0 * u[i];
        out[i] = acc * inv_h2;
    }
}

void residual(const Stencil& s, std::span<const double> u, std::span<const double> d,
              const std::function<double(double, double)>& f, std::span<double> out) {
    const double inv_h2 = 1.0 / (s.h * s.h);
    const std::size_t n = s.nx * s.ny;
    for (std::size_t i = 0; i < n; ++i) {
        if (!s.active[i]) continue;
        double acc = 2.0 * u[i] - u[i - 1] - u[i + 1];
        if (s.dim == 2) acc += 2.0 * u[i] - u[i - s.nx] - u[i + s.nx];
        out[i] = acc * inv_h2 + f(d[i], u[i]);
    }
}

void increment_floor(const std::function<double(double)>& fn, std::span<const double> ell,
                     std::span<const double> u_samples, std::span<double> out, std::span<double> argmin) {
    for (std::size_t k = 0; k < ell.size(); ++k) {
        double best = std::numeric_limits<double>::infinity();
        double best_u = 0.0;
        for (const double u : u_samples) {
            const double inc = fn(ell[k] + u) - fn(u);
            if (inc < best) {
                best = inc;
                best_u = u;
            }
        }
        out[k] = best;
        argmin[k] = best_u;
    }
}

} // namespace blowup::kernels::serial
