// Timing harness for the two hot kernels, serial vs OpenMP.
// Usage: bench_kernels [n_xi n_eta oracle_n repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "qlt/dynamics.hpp"
#include "qlt/ensemble.hpp"
#include "qlt/oracle.hpp"
#include "qlt/parallel.hpp"

using namespace qlt;

namespace {

double seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

template <typename F>
double time_best(int repeats, F&& f) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const double t0 = seconds();
        f();
        best = std::min(best, seconds() - t0);
    }
    return best;
}

}  // namespace

int main(int argc, char** argv) {
    const int n_xi = argc > 1 ? std::atoi(argv[1]) : 41;
    const int n_eta = argc > 2 ? std::atoi(argv[2]) : 41;
    const int oracle_n = argc > 3 ? std::atoi(argv[3]) : 161;
    const int repeats = argc > 4 ? std::atoi(argv[4]) : 5;
    if (argc > 5 || n_xi < 5 || n_eta < 5 || oracle_n < 9 || repeats < 1 ||
        n_xi % 2 == 0 || n_eta % 2 == 0 || oracle_n % 2 == 0) {
        std::fprintf(stderr,
                     "usage: bench_kernels [n_xi n_eta oracle_n repeats]\n"
                     "  grid sizes must be odd, n_xi/n_eta >= 5, oracle_n >= "
                     "9, repeats >= 1\n");
        return 2;
    }

    PhysicalParams p = derived_params({});
    InitialCondition ic = displaced_ground_state(p, 2.0 * p.sigma0);
    GridSpec grid;
    grid.n_xi = n_xi;
    grid.n_eta = n_eta;
    Ensemble e = init_ensemble(p, ic, grid);
    MwlsSettings mw;

    std::printf("threads available: %d\n", par::hardware_threads());
    std::printf("[mwls field fits] %d x %d points\n", n_xi, n_eta);
    const double t_serial = time_best(repeats, [&] {
        compute_field_derivatives(e, mw, par::Mode::serial);
    });
    const double t_omp = time_best(repeats, [&] {
        compute_field_derivatives(e, mw, par::Mode::openmp);
    });
    std::printf("  serial %.4f s   openmp %.4f s   speedup %.2fx\n", t_serial,
                t_omp, t_serial / t_omp);

    OracleGrid g = make_oracle_grid(p, ic, oracle_n, oracle_n, 10.0 * p.sigma0);
    const double dt = 0.5 * oracle_max_dt(g, p);
    std::printf("[oracle rk4 step] %d x %d grid\n", oracle_n, oracle_n);
    const double o_serial = time_best(repeats, [&] {
        g = oracle_step(g, p, dt, par::Mode::serial);
    });
    const double o_omp = time_best(repeats, [&] {
        g = oracle_step(g, p, dt, par::Mode::openmp);
    });
    std::printf("  serial %.4f s   openmp %.4f s   speedup %.2fx\n", o_serial,
                o_omp, o_serial / o_omp);
    return 0;
}
