#include "arbsr/threading.hpp"

#include <cstdlib>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

#ifdef ARBSR_HAVE_OPENBLAS
extern "C" void openblas_set_num_threads(int);
#endif

namespace arbsr::threads {

namespace {

int g_max = -1;  // -1: uninitialized

int hardware_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : int(n);
}

void apply(int n) {
    g_max = n;
#ifdef _OPENMP
    omp_set_num_threads(n);
#endif
#ifdef ARBSR_HAVE_OPENBLAS
    openblas_set_num_threads(n);
#endif
}

void init_from_env() {
    int n = 0;
    if (const char* env = std::getenv("ARBSR_THREADS")) n = std::atoi(env);
    apply(n <= 0 ? hardware_threads() : n);
}

}  // namespace

void set_max(int n) {
    apply(n <= 0 ? hardware_threads() : n);
}

int max() {
    if (g_max < 0) init_from_env();
    return g_max;
}

}  // namespace arbsr::threads
