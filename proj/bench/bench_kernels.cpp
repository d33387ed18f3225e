// Timing comparison between the OpenMP kernels and their serial references.
#include <chrono>
#include <complex>
#include <cstdio>
#include <vector>

#include "musgen/kernels.hpp"
#include "musgen/rng.hpp"
#include "musgen/signal.hpp"

using Clock = std::chrono::high_resolution_clock;

namespace {

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void bench_matmul(int m, int k, int n, int reps) {
    musgen::Rng rng(42);
    std::vector<double> a(static_cast<size_t>(m) * k), b(static_cast<size_t>(k) * n),
        c(static_cast<size_t>(m) * n);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();

    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) musgen::kernels::matmul_nn(a.data(), b.data(), c.data(), m, k, n);
    const double omp_ms = ms_since(t0) / reps;

    t0 = Clock::now();
    for (int r = 0; r < reps; ++r) musgen::kernels::ref::matmul_nn(a.data(), b.data(), c.data(), m, k, n);
    const double ref_ms = ms_since(t0) / reps;

    const double gflops = 2.0 * m * k * n / (omp_ms * 1e6);
    std::printf("matmul %4dx%4dx%4d  omp %8.3f ms  serial %8.3f ms  speedup %5.2fx  %6.2f GFLOP/s\n", m,
                k, n, omp_ms, ref_ms, ref_ms / omp_ms, gflops);
}

void bench_fft(int n, int reps) {
    musgen::Rng rng(7);
    std::vector<std::complex<double>> x(static_cast<size_t>(n)), y(static_cast<size_t>(n));
    for (auto& v : x) v = {rng.normal(), 0.0};

    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) {
        y = x;
        musgen::kernels::fft_pow2(y.data(), n, false);
    }
    const double fft_ms = ms_since(t0) / reps;

    std::vector<std::complex<double>> out(static_cast<size_t>(n));
    t0 = Clock::now();
    const int dft_reps = n > 2048 ? 1 : reps;
    for (int r = 0; r < dft_reps; ++r) musgen::kernels::ref::dft(x.data(), out.data(), n, false);
    const double dft_ms = ms_since(t0) / dft_reps;

    std::printf("fft    n=%6d          fft %8.3f ms  naive dft %8.3f ms  speedup %5.0fx\n", n, fft_ms,
                dft_ms, dft_ms / fft_ms);
}

void bench_stft(int seconds, int reps) {
    musgen::Rng rng(3);
    musgen::AudioClip clip;
    clip.samples.resize(static_cast<size_t>(16000) * seconds);
    for (auto& s : clip.samples) s = 0.2 * rng.normal();
    const musgen::SignalConfig cfg;

    auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) {
        auto spec = musgen::stft(clip, cfg);
        (void)spec;
    }
    std::printf("stft   %ds clip          %8.3f ms per call (frames in parallel)\n", seconds,
                ms_since(t0) / reps);
}

}  // namespace

int main() {
    std::printf("-- kernel benchmarks --\n");
    bench_matmul(24, 512, 1024, 20);
    bench_matmul(24, 3904, 256, 20);
    bench_matmul(256, 256, 256, 20);
    bench_fft(512, 2000);
    bench_fft(16384, 50);
    bench_stft(4, 10);
    return 0;
}
