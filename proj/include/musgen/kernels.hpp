#pragma once

#include <complex>
#include <cstddef>

namespace musgen::kernels {

// Dense f64 kernels. All matrices are row-major. The OpenMP versions
// partition output rows, so every output element is accumulated by exactly
// one thread in a fixed order: results are bit-stable for any thread count.

// c[m x n] = a[m x k] * b[k x n]
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n);
// c[m x n] = a[m x k] * bt[n x k]^T
void matmul_nt(const double* a, const double* bt, double* c, int m, int k, int n);
// c[m x n] = at[k x m]^T * b[k x n]
void matmul_tn(const double* at, const double* b, double* c, int m, int k, int n);

// In-place iterative radix-2 FFT; n must be a power of two.
// inverse=true applies the 1/n scale.
void fft_pow2(std::complex<double>* x, int n, bool inverse);

bool is_pow2(int n);

namespace ref {

// Naive serial implementations kept as test references for the parallel
// kernels above.
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n);
void dft(const std::complex<double>* in, std::complex<double>* out, int n, bool inverse);

}  // namespace ref

}  // namespace musgen::kernels
