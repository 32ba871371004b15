#pragma once

namespace arbsr::threads {

/// Cap worker threads used by parallel kernels and the BLAS backend.
/// 0 means auto (hardware concurrency). Reads ARBSR_THREADS on first use.
void set_max(int n);
int max();

}  // namespace arbsr::threads
