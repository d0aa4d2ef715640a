// Serial reference kernels against their OpenMP counterparts.
#include "blowup/kernels.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <vector>

using namespace blowup::kernels;

namespace {

template <class Fn>
double best_of(int reps, Fn&& fn) {
    double best = INFINITY;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

bool same(const std::vector<double>& a, const std::vector<double>& b) {
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void row(const char* name, std::size_t size, double ts, double tp, bool identical) {
    std::printf("%-16s %10zu %12.3f %12.3f %8.2f %s\n", name, size, 1e3 * ts, 1e3 * tp, ts / tp,
                identical ? "identical" : "DIFFERENT");
}

} // namespace

int main(int argc, char** argv) {
    const std::size_t n = argc > 1 ? static_cast<std::size_t>(std::atol(argv[1])) : 1024;
    const int reps = argc > 2 ? std::atoi(argv[2]) : 5;
    std::printf("threads %d, %zux%zu lattice, best of %d\n", omp_get_max_threads(), n, n, reps);
    std::printf("%-16s %10s %12s %12s %8s\n", "kernel", "size", "serial ms", "omp ms", "speedup");

    std::vector<unsigned char> mask(n * n, 0);
    for (std::size_t j = 1; j + 1 < n; ++j)
        for (std::size_t i = 1; i + 1 < n; ++i) mask[j * n + i] = 1;
    const Stencil s{2, n, n, 1.0 / static_cast<double>(n - 1), mask};

    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> dist(0.0, 10.0);
    std::vector<double> u(n * n), d(n * n);
    for (auto& v : u) v = dist(rng);
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = static_cast<double>(k % n) / static_cast<double>(n);

    std::vector<double> a(n * n, 0.0), b(n * n, 0.0);
    const double ls = best_of(reps, [&] { serial::laplacian(s, u, a); });
    const double lp = best_of(reps, [&] { omp::laplacian(s, u, b); });
    row("laplacian", n * n, ls, lp, same(a, b));

    const std::function<double(double, double)> f = [](double dd, double r) { return dd * r * r * r; };
    const double rs = best_of(reps, [&] { serial::residual(s, u, d, f, a); });
    const double rp = best_of(reps, [&] { omp::residual(s, u, d, f, b); });
    row("residual", n * n, rs, rp, same(a, b));

    const std::function<double(double)> g = [](double r) { return r * r * std::sqrt(r); };
    std::vector<double> ell(256), us(4096);
    for (std::size_t i = 0; i < ell.size(); ++i) ell[i] = 0.01 * std::pow(1e4, static_cast<double>(i) / 255.0);
    for (std::size_t i = 0; i < us.size(); ++i) us[i] = 1e3 * static_cast<double>(i) / 4095.0;
    std::vector<double> ga(ell.size()), gb(ell.size()), aa(ell.size()), ab(ell.size());
    const double is = best_of(reps, [&] { serial::increment_floor(g, ell, us, ga, aa); });
    const double ip = best_of(reps, [&] { omp::increment_floor(g, ell, us, gb, ab); });
    row("increment_floor", ell.size() * us.size(), is, ip, same(ga, gb) && same(aa, ab));
    return 0;
}
