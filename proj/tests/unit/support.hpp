#pragma once

#include "fredformer/fredformer.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace fftest {

using fredformer::Matrix;
using fredformer::Vector;

// Direct O(L^2) transform in long double, independent of the library's
// twiddle tables.
inline std::vector<std::complex<long double>> naive_dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<long double>> out(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
        std::complex<long double> acc = 0;
        for (std::size_t l = 0; l < n; ++l) {
            const long double ang = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>((k * l) % n) /
                                    static_cast<long double>(n);
            acc += static_cast<long double>(x[l]) * std::complex<long double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc / static_cast<long double>(n);
    }
    return out;
}

inline std::vector<double> random_signal(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    std::vector<double> x(n);
    for (auto& v : x) v = d(rng);
    return x;
}

// Sum of cosines strictly below Nyquist, so the half spectrum is lossless.
inline std::vector<double> band_limited(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(n, 0.0);
    const std::size_t kmax = n / 2 - 1;
    for (std::size_t c = 0; c < 5; ++c) {
        const std::size_t k = static_cast<std::size_t>(u(rng) * static_cast<double>(kmax + 1)) % (kmax + 1);
        const double amp = 0.1 + 2.0 * u(rng);
        const double ph = 2.0 * std::numbers::pi * u(rng);
        for (std::size_t l = 0; l < n; ++l) {
            x[l] += amp * std::cos(2.0 * std::numbers::pi * static_cast<double>((k * l) % n) / static_cast<double>(n) + ph);
        }
    }
    return x;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = d(rng);
    return m;
}

// Central differences of f at x for every coordinate.
inline Vector numeric_gradient(const std::function<double(const Vector&)>& f, Vector x, double h = 1e-5) {
    Vector g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
    const double denom = std::max(a.norm(), b.norm());
    return denom == 0.0 ? 0.0 : (a - b).norm() / denom;
}

template <class F>
fredformer::ErrorKind error_kind_of(F&& f) {
    try {
        f();
    } catch (const fredformer::Error& e) {
        return e.kind();
    }
    FAIL("expected fredformer::Error");
    return fredformer::ErrorKind::InvalidArgument;
}

}  // namespace fftest
