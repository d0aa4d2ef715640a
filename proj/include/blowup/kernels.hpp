#pragma once

#include <cstddef>
#include <functional>
#include <span>

// Data-parallel inner loops. Each kernel exists twice: a plain serial reference
// (kept for testing and benchmarking) and an OpenMP version used by the library.
// Both write disjoint outputs per index, so results are bitwise identical for any
// thread count.

namespace blowup::kernels {

/// Structured lattice view shared by the stencil kernels. `active[i]` marks
/// interior nodes; every other node is left untouched.
struct Stencil {
    int dim = 1;
    std::size_t nx = 0;
    std::size_t ny = 1;
    double h = 1.0;
    std::span<const unsigned char> active;
};

namespace serial {
/// out[i] = (discrete Laplacian of u)[i] on active nodes.
void laplacian(const Stencil& s, std::span<const double> u, std::span<double> out);
/// out[i] = -Lap(u)[i] + f(d[i], u[i]) on active nodes.
void residual(const Stencil& s, std::span<const double> u, std::span<const double> d,
              const std::function<double(double, double)>& f, std::span<double> out);
/// For every ell: min over u-samples of fn(ell + u) - fn(u); argmin stored alongside.
void increment_floor(const std::function<double(double)>& fn, std::span<const double> ell,
                     std::span<const double> u_samples, std::span<double> out, std::span<double> argmin);
} // namespace serial

namespace omp {
void laplacian(const Stencil& s, std::span<const double> u, std::span<double> out);
void residual(const Stencil& s, std::span<const double> u, std::span<const double> d,
              const std::function<double(double, double)>& f, std::span<double> out);
void increment_floor(const std::function<double(double)>& fn, std::span<const double> ell,
                     std::span<const double> u_samples, std::span<double> out, std::span<double> argmin);
} // namespace omp

} // namespace blowup::kernels
