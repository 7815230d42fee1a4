#include "support.hpp"

using namespace fredformer;
using fftest::naive_dft;

TEST_SUITE("spectral") {

TEST_CASE("dft of a constant signal is DC only") {
    const std::vector<double> x{1, 1, 1, 1};
    const auto a = dft(x);
    REQUIRE(a.size() == 2);
    CHECK(a[0].real() == doctest::Approx(1.0));
    CHECK(a[0].imag() == doctest::Approx(0.0));
    CHECK(std::abs(a[1]) < 1e-15);
}

TEST_CASE("single cosine puts amplitude 0.5 in its bin") {
    std::vector<double> x(8);
    for (int l = 0; l < 8; ++l) x[l] = std::cos(2.0 * std::numbers::pi * l / 8.0);
    const auto a = dft(x);
    const auto ref = naive_dft(x);
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(std::abs(a[k] - std::complex<double>(ref[k])) < 1e-14);
        CHECK(std::abs(a[k]) == doctest::Approx(k == 1 ? 0.5 : 0.0));
    }
}

TEST_CASE("dft agrees with the direct sum for odd and even lengths") {
    std::mt19937_64 rng(11);
    for (std::size_t n : {2u, 3u, 7u, 16u, 96u, 97u, 720u}) {
        const auto x = fftest::random_signal(rng, n);
        const auto a = dft(x);
        const auto ref = naive_dft(x);
        REQUIRE(a.size() == n / 2);
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k] - std::complex<double>(ref[k])) < 1e-12);
    }
}

TEST_CASE("idft inverts band-limited signals") {
    std::mt19937_64 rng(3);
    for (std::size_t n : {16u, 96u, 720u}) {
        for (int trial = 0; trial < 10; ++trial) {
            const auto x = fftest::band_limited(rng, n);
            const auto y = idft(dft(x), n);
            double worst = 0.0;
            for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
            CHECK(worst < 1e-9);
        }
    }
}

TEST_CASE("idft special spectra") {
    const std::vector<Complex> zero(4, Complex{});
    for (double v : idft(zero, 8)) CHECK(v == 0.0);

    const std::vector<Complex> dc{Complex(2.5, 0.0), {}, {}, {}};
    for (double v : idft(dc, 8)) CHECK(v == doctest::Approx(2.5));

    const std::vector<Complex> one{{}, Complex(0.5, 0.0), {}, {}};
    const auto y = idft(one, 8);
    for (int l = 0; l < 8; ++l) CHECK(std::abs(y[l] - std::cos(2.0 * std::numbers::pi * l / 8.0)) < 1e-12);
}

TEST_CASE("dft rejects bad input") {
    CHECK(fftest::error_kind_of([] { dft(std::vector<double>{1.0}); }) == ErrorKind::InvalidArgument);
    CHECK(fftest::error_kind_of([] { dft(std::vector<double>{1.0, std::nan("")}); }) == ErrorKind::NonFinite);
    CHECK(fftest::error_kind_of([] { idft(std::vector<Complex>(3), 8); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("linearity") {
    std::mt19937_64 rng(5);
    const std::size_t n = 96;
    const auto x = fftest::random_signal(rng, n);
    const auto y = fftest::random_signal(rng, n);
    const double alpha = 1.7, beta = -0.3;
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = alpha * x[i] + beta * y[i];
    const auto ax = dft(x), ay = dft(y), az = dft(z);
    for (std::size_t k = 0; k < az.size(); ++k) CHECK(std::abs(az[k] - (alpha * ax[k] + beta * ay[k])) < 1e-9);
}

TEST_CASE("parseval over the symmetric spectrum") {
    CHECK(spectral_energy(std::vector<double>(5, 0.0)) == 0.0);
    CHECK(spectral_energy(std::vector<double>{3, 0, 0, 0}) == 9.0);

    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = fftest::band_limited(rng, 96);
        const auto a = dft(x);
        const double time = spectral_energy(x);
        CHECK(std::abs(half_spectrum_energy(a, 96) - time) / time < 1e-9);
    }
}

TEST_CASE("DftPlan batches match the scalar transform") {
    std::mt19937_64 rng(2);
    const Matrix x = fftest::random_matrix(rng, 5, 24);
    const DftPlan plan(24);
    Matrix re, im;
    plan.forward(x, re, im);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        std::vector<double> row(24);
        for (int l = 0; l < 24; ++l) row[l] = x(r, l);
        const auto a = dft(row);
        for (Eigen::Index k = 0; k < 12; ++k) {
            CHECK(std::abs(re(r, k) - a[k].real()) < 1e-13);
            CHECK(std::abs(im(r, k) - a[k].imag()) < 1e-13);
        }
    }
}

TEST_CASE("DftPlan inverse_adjoint is the transpose of inverse") {
    std::mt19937_64 rng(4);
    const DftPlan plan(15);
    const Matrix re = fftest::random_matrix(rng, 3, 7);
    const Matrix im = fftest::random_matrix(rng, 3, 7);
    const Matrix g = fftest::random_matrix(rng, 3, 15);
    Matrix gre, gim;
    plan.inverse_adjoint(g, gre, gim);
    const double lhs = (plan.inverse(re, im).array() * g.array()).sum();
    const double rhs = (re.array() * gre.array()).sum() + (im.array() * gim.array()).sum();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("spectrum_of per channel") {
    Matrix v(2, 6);
    v << 1, 2, 3, 4, 5, 6, -1, -2, -3, -4, -5, -6;
    const Spectrum s = spectrum_of(make_series(v));
    CHECK(s.bins() == 3);
    CHECK(s.origin_length == 6);
    CHECK((s.real_part.row(0) + s.real_part.row(1)).norm() < 1e-15);
    CHECK((s.imag_part.row(0) + s.imag_part.row(1)).norm() < 1e-15);

    const Spectrum c = spectrum_of(make_series(Matrix::Constant(1, 10, 4.0)));
    CHECK(c.real_part(0, 0) == doctest::Approx(4.0));
    CHECK(c.real_part.rightCols(4).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(c.imag_part.cwiseAbs().maxCoeff() < 1e-14);

    const Spectrum seven = spectrum_of(make_series(Matrix::Random(7, 96)));
    CHECK(seven.channels() == 7);
    CHECK(seven.bins() == 48);
    CHECK((reconstruct(seven).array().isFinite()).all());
}

TEST_CASE("key components follow both argmaxes") {
    std::vector<double> hist(16, 0.1), truth(16, 0.1);
    hist[5] = 2.0;
    truth[5] = 1.0;
    hist[9] = 3.0;
    truth[10] = 3.0;
    const auto set = detect_key_components(hist, truth, 8);
    REQUIRE(set.size() == 1);
    CHECK(set.components[0].band_index == 0);
    CHECK(set.components[0].bin_index == 5);
    CHECK(set.components[0].hist_amplitude == 2.0);
    CHECK(set.components[0].truth_amplitude == 1.0);
}

TEST_CASE("key component ties resolve to the lowest bin") {
    const std::vector<double> flat(8, 1.0);
    const auto set = detect_key_components(flat, flat, 4);
    REQUIRE(set.size() == 2);
    CHECK(set.bins() == std::vector<Eigen::Index>{0, 4});
}

TEST_CASE("short last band and size limits") {
    std::vector<double> a(10, 0.0);
    a[9] = 1.0;
    const auto set = detect_key_components(a, a, 4);
    CHECK(set.bins().back() == 9);
    CHECK(set.components.back().band_index == 2);
    CHECK(fftest::error_kind_of([&] { detect_key_components(a, a, 11); }) == ErrorKind::InvalidArgument);
    CHECK(fftest::error_kind_of([&] { detect_key_components(a, a, 0); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("permuting non-argmax bins keeps the detection") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto shuffle_rest = [&](std::vector<double>& a, int band) {
        const auto first = a.begin() + band * 6;
        const auto top = std::max_element(first, first + 6) - a.begin();
        std::vector<double> rest;
        for (int i = band * 6; i < band * 6 + 6; ++i)
            if (i != top) rest.push_back(a[i]);
        std::shuffle(rest.begin(), rest.end(), rng);
        std::size_t j = 0;
        for (int i = band * 6; i < band * 6 + 6; ++i)
            if (i != top) a[i] = rest[j++];
    };
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> h(24), t(24);
        for (auto& v : h) v = u(rng);
        for (auto& v : t) v = u(rng);
        if (trial % 2 == 0) t = h;
        const auto before = detect_key_components(h, t, 6).bins();
        for (int band = 0; band < 4; ++band) {
            shuffle_rest(h, band);
            shuffle_rest(t, band);
        }
        CHECK(detect_key_components(h, t, 6).bins() == before);
    }
}

TEST_CASE("relative error") {
    CHECK(relative_error(Complex(1, 2), Complex(1, 2)) == 0.0);
    CHECK(relative_error(Complex(0, 0), Complex(0.3, -0.4)) == doctest::Approx(1.0));
    CHECK(relative_error(Complex(0.9, 0), Complex(1.0, 0)) == doctest::Approx(0.1));
    CHECK(fftest::error_kind_of([] { relative_error(Complex(1, 0), Complex(0, 0)); }) ==
          ErrorKind::UndefinedReference);

    std::mt19937_64 rng(12);
    std::normal_distribution<double> d;
    for (int trial = 0; trial < 20; ++trial) {
        const Complex p(d(rng), d(rng)), t(d(rng), d(rng)), z(d(rng), d(rng));
        CHECK(relative_error(z * p, z * t) == doctest::Approx(relative_error(p, t)).epsilon(1e-12));
    }
}

TEST_CASE("relative error on spectra selects channel and bin") {
    Spectrum pred{Matrix::Zero(2, 3), Matrix::Zero(2, 3), 6};
    Spectrum truth{Matrix::Ones(2, 3), Matrix::Zero(2, 3), 6};
    pred.real_part(1, 2) = 0.5;
    CHECK(relative_error(pred, truth, 2, 1) == doctest::Approx(0.5));
    CHECK(relative_error(pred, truth, 2, 0) == doctest::Approx(1.0));
}

TEST_CASE("amplitude proportions") {
    KeyComponentSet equal;
    for (int i = 0; i < 4; ++i) equal.components.push_back({i, i * 8, 2.0, 2.0});
    for (double p : amplitude_proportions(equal)) CHECK(p == doctest::Approx(0.25));

    KeyComponentSet two;
    two.components = {{0, 1, 3.0, 3.0}, {1, 9, 1.0, 1.0}};
    CHECK(amplitude_proportion(two, 0) == doctest::Approx(0.75));
    CHECK(amplitude_proportion(two, 1) == doctest::Approx(0.25));

    KeyComponentSet plant;
    plant.components = {{0, 1, 1.0, 1.0}, {1, 9, 0.6, 0.6}, {2, 17, 0.3, 0.3}};
    const auto p = amplitude_proportions(plant);
    CHECK(p[0] == doctest::Approx(1.0 / 1.9));
    CHECK(p[1] == doctest::Approx(0.6 / 1.9));
    CHECK(p[2] == doctest::Approx(0.3 / 1.9));
    CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0));

    CHECK(fftest::error_kind_of([] { amplitude_proportions(KeyComponentSet{}); }) == ErrorKind::EmptyInput);
}

}  // TEST_SUITE
