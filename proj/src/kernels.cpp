#include "musgen/kernels.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "musgen/errors.hpp"

namespace musgen::kernels {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = 0.0;
        const double* ai = a + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double aip = ai[p];
            const double* bp = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void matmul_nt(const double* a, const double* bt, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<size_t>(i) * k;
        double* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = bt + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
}

void matmul_tn(const double* at, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] = 0.0;
        for (int p = 0; p < k; ++p) {
            const double aip = at[static_cast<size_t>(p) * m + i];
            const double* bp = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void fft_pow2(std::complex<double>* x, int n, bool inverse) {
    if (!is_pow2(n)) throw InputError("fft_pow2: length must be a power of two, got " + std::to_string(n));
    // bit-reversal permutation
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    const double sign = inverse ? 1.0 : -1.0;
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * std::numbers::pi / len;
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (int j = 0; j < len / 2; ++j) {
                const std::complex<double> u = x[i + j];
                const std::complex<double> v = x[i + j + len / 2] * w;
                x[i + j] = u + v;
                x[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / n;
        for (int i = 0; i < n; ++i) x[i] *= inv;
    }
}

namespace ref {

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p)
                acc += a[static_cast<size_t>(i) * k + p] * b[static_cast<size_t>(p) * n + j];
            c[static_cast<size_t>(i) * n + j] = acc;
        }
    }
}

void dft(const std::complex<double>* in, std::complex<double>* out, int n, bool inverse) {
    const double sign = inverse ? 1.0 : -1.0;
    for (int k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (int t = 0; t < n; ++t) {
            const double ang = sign * 2.0 * std::numbers::pi * k * t / n;
            acc += in[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = inverse ? acc / static_cast<double>(n) : acc;
    }
}

}  // namespace ref

}  // namespace musgen::kernels
