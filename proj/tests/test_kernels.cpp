#include <array>
#include <complex>
#include <vector>

#include "doctest.h"
#include "musgen/errors.hpp"
#include "musgen/kernels.hpp"
#include "musgen/rng.hpp"

using namespace musgen;

TEST_SUITE_BEGIN("kernels");

TEST_CASE("parallel matmul matches the serial reference") {
    Rng rng(11);
    const std::vector<std::array<int, 3>> shapes = {{1, 1, 1}, {3, 5, 7}, {24, 33, 17}, {65, 40, 9}};
    for (const auto [m, k, n] : shapes) {
        std::vector<double> a(static_cast<size_t>(m) * k), b(static_cast<size_t>(k) * n);
        for (auto& v : a) v = rng.normal();
        for (auto& v : b) v = rng.normal();
        std::vector<double> c_omp(static_cast<size_t>(m) * n), c_ref(static_cast<size_t>(m) * n);
        kernels::matmul_nn(a.data(), b.data(), c_omp.data(), m, k, n);
        kernels::ref::matmul_nn(a.data(), b.data(), c_ref.data(), m, k, n);
        for (size_t i = 0; i < c_omp.size(); ++i) CHECK(c_omp[i] == doctest::Approx(c_ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("transposed-variant kernels agree with explicit transposes") {
    Rng rng(5);
    const int m = 7, k = 11, n = 4;
    std::vector<double> a(static_cast<size_t>(m) * k), b(static_cast<size_t>(k) * n);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    std::vector<double> expect(static_cast<size_t>(m) * n);
    kernels::ref::matmul_nn(a.data(), b.data(), expect.data(), m, k, n);

    std::vector<double> bt(static_cast<size_t>(n) * k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < n; ++j) bt[static_cast<size_t>(j) * k + i] = b[static_cast<size_t>(i) * n + j];
    std::vector<double> c(static_cast<size_t>(m) * n);
    kernels::matmul_nt(a.data(), bt.data(), c.data(), m, k, n);
    for (size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(expect[i]).epsilon(1e-12));

    std::vector<double> at(static_cast<size_t>(k) * m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j) at[static_cast<size_t>(j) * m + i] = a[static_cast<size_t>(i) * k + j];
    kernels::matmul_tn(at.data(), b.data(), c.data(), m, k, n);
    for (size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("fft matches the naive dft and inverts cleanly") {
    Rng rng(23);
    for (const int n : {8, 64, 512}) {
        std::vector<std::complex<double>> x(static_cast<size_t>(n));
        for (auto& v : x) v = {rng.normal(), rng.normal()};
        std::vector<std::complex<double>> expect(static_cast<size_t>(n));
        kernels::ref::dft(x.data(), expect.data(), n, false);
        auto y = x;
        kernels::fft_pow2(y.data(), n, false);
        for (int i = 0; i < n; ++i) {
            CHECK(std::abs(y[static_cast<size_t>(i)] - expect[static_cast<size_t>(i)]) < 1e-9 * n);
        }
        kernels::fft_pow2(y.data(), n, true);
        for (int i = 0; i < n; ++i)
            CHECK(std::abs(y[static_cast<size_t>(i)] - x[static_cast<size_t>(i)]) < 1e-12 * n);
    }
}

TEST_CASE("fft rejects non-power-of-two lengths") {
    std::vector<std::complex<double>> x(12);
    CHECK_THROWS_AS(kernels::fft_pow2(x.data(), 12, false), InputError);
}

TEST_SUITE_END();
