#include "fredformer/spectral.hpp"

#include "fredformer/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace fredformer {
namespace {

// cos/sin of 2*pi*j/L for j in [0, L); products k*l are reduced mod L before
// lookup so large indices keep full precision.
struct Twiddles {
    std::vector<double> c;
    std::vector<double> s;

    explicit Twiddles(Eigen::Index length) : c(static_cast<std::size_t>(length)), s(c.size()) {
        const double step = 2.0 * std::numbers::pi / static_cast<double>(length);
        for (Eigen::Index j = 0; j < length; ++j) {
            c[static_cast<std::size_t>(j)] = std::cos(step * static_cast<double>(j));
            s[static_cast<std::size_t>(j)] = std::sin(step * static_cast<double>(j));
        }
    }
};

void check_finite(std::span<const double> x) {
    for (double v : x) require(std::isfinite(v), ErrorKind::NonFinite, "dft input contains non-finite values");
}

}  // namespace

std::vector<Complex> dft(std::span<const double> x) {
    const auto length = static_cast<Eigen::Index>(x.size());
    require(length >= 2, ErrorKind::InvalidArgument,
            "dft needs a signal of length >= 2, got " + std::to_string(length));
    check_finite(x);

    const Twiddles tw(length);
    const Eigen::Index bins = half_bins(length);
    std::vector<Complex> out(static_cast<std::size_t>(bins));
    const double scale = 1.0 / static_cast<double>(length);
    for (Eigen::Index k = 0; k < bins; ++k) {
        double re = 0.0;
        double im = 0.0;
        for (Eigen::Index l = 0; l < length; ++l) {
            const auto j = static_cast<std::size_t>((k * l) % length);
            re += x[static_cast<std::size_t>(l)] * tw.c[j];
            im -= x[static_cast<std::size_t>(l)] * tw.s[j];
        }
        out[static_cast<std::size_t>(k)] = {re * scale, im * scale};
    }
    return out;
}

std::vector<double> idft(std::span<const Complex> spectrum, std::size_t length) {
    require(length >= 2, ErrorKind::InvalidArgument, "idft needs length >= 2");
    require(spectrum.size() == static_cast<std::size_t>(half_bins(static_cast<Eigen::Index>(length))),
            ErrorKind::ShapeMismatch,
            "idft: spectrum has " + std::to_string(spectrum.size()) + " bins, expected " +
                std::to_string(length / 2) + " for length " + std::to_string(length));

    const auto len = static_cast<Eigen::Index>(length);
    const Twiddles tw(len);
    std::vector<double> out(length, 0.0);
    for (Eigen::Index l = 0; l < len; ++l) {
        double acc = spectrum.empty() ? 0.0 : spectrum[0].real();
        for (std::size_t k = 1; k < spectrum.size(); ++k) {
            const auto j = static_cast<std::size_t>((static_cast<Eigen::Index>(k) * l) % len);
            acc += 2.0 * (spectrum[k].real() * tw.c[j] - spectrum[k].imag() * tw.s[j]);
        }
        out[static_cast<std::size_t>(l)] = acc;
    }
    return out;
}

DftPlan::DftPlan(Eigen::Index length) : length_(length) {
    require(length >= 2, ErrorKind::InvalidArgument, "DftPlan needs length >= 2");
    const Twiddles tw(length);
    const Eigen::Index bins = half_bins(length);
    cos_.resize(length, bins);
    sin_.resize(length, bins);
    inv_cos_.resize(bins, length);
    inv_sin_.resize(bins, length);
    for (Eigen::Index l = 0; l < length; ++l) {
        for (Eigen::Index k = 0; k < bins; ++k) {
            const auto j = static_cast<std::size_t>((k * l) % length);
            cos_(l, k) = tw.c[j];
            sin_(l, k) = tw.s[j];
            const double w = k == 0 ? 1.0 : 2.0;
            inv_cos_(k, l) = w * tw.c[j];
            inv_sin_(k, l) = -w * tw.s[j];
        }
    }
}

void DftPlan::forward(const Matrix& signals, Matrix& real_part, Matrix& imag_part) const {
    require(signals.cols() == length_, ErrorKind::ShapeMismatch,
            "DftPlan::forward: expected " + std::to_string(length_) + " columns, got " +
                std::to_string(signals.cols()));
    const double scale = 1.0 / static_cast<double>(length_);
    real_part.noalias() = signals * cos_;
    real_part *= scale;
    imag_part.noalias() = signals * sin_;
    imag_part *= -scale;
}

Matrix DftPlan::inverse(const Matrix& real_part, const Matrix& imag_part) const {
    require(real_part.cols() == bins() && imag_part.cols() == bins() &&
                real_part.rows() == imag_part.rows(),
            ErrorKind::ShapeMismatch, "DftPlan::inverse: coefficient shape mismatch");
    Matrix out = real_part * inv_cos_;
    out.noalias() += imag_part * inv_sin_;
    return out;
}

void DftPlan::inverse_adjoint(const Matrix& grad_signals, Matrix& grad_real, Matrix& grad_imag) const {
    grad_real.noalias() = grad_signals * inv_cos_.transpose();
    grad_imag.noalias() = grad_signals * inv_sin_.transpose();
}

Vector Spectrum::amplitudes(Eigen::Index channel) const {
    return (real_part.row(channel).array().square() + imag_part.row(channel).array().square())
        .sqrt()
        .matrix()
        .transpose();
}

void Spectrum::validate() const {
    require(origin_length >= 2, ErrorKind::InvalidArgument, "spectrum origin length must be >= 2");
    require(real_part.rows() == imag_part.rows() && real_part.cols() == imag_part.cols(),
            ErrorKind::ShapeMismatch, "spectrum real/imag shapes differ");
    require(real_part.cols() == half_bins(origin_length), ErrorKind::ShapeMismatch,
            "spectrum bin count does not match floor(L/2)");
    require(real_part.allFinite() && imag_part.allFinite(), ErrorKind::NonFinite,
            "spectrum contains non-finite values");
}

Spectrum spectrum_of(const MultivariateSeries& series) {
    series.validate();
    const DftPlan plan(series.length());
    Spectrum out;
    out.origin_length = series.length();
    plan.forward(series.values, out.real_part, out.imag_part);
    return out;
}

Matrix reconstruct(const Spectrum& spectrum) {
    spectrum.validate();
    return DftPlan(spectrum.origin_length).inverse(spectrum.real_part, spectrum.imag_part);
}

std::vector<Eigen::Index> KeyComponentSet::bins() const {
    std::vector<Eigen::Index> out;
    out.reserve(components.size());
    for (const auto& c : components) out.push_back(c.bin_index);
    return out;
}

KeyComponentSet detect_key_components(std::span<const double> hist_amplitudes,
                                      std::span<const double> truth_amplitudes,
                                      Eigen::Index band_size) {
    require(hist_amplitudes.size() == truth_amplitudes.size(), ErrorKind::ShapeMismatch,
            "key-component detection needs equal-length spectra");
    const auto bins = static_cast<Eigen::Index>(hist_amplitudes.size());
    require(band_size >= 1, ErrorKind::InvalidArgument, "band size must be >= 1");
    require(band_size <= bins, ErrorKind::InvalidArgument,
            "band size " + std::to_string(band_size) + " exceeds spectrum length " + std::to_string(bins));

    // first maximum wins, so ties go to the lowest bin
    auto argmax = [](std::span<const double> v) {
        return static_cast<Eigen::Index>(std::max_element(v.begin(), v.end()) - v.begin());
    };

    KeyComponentSet out;
    out.band_size = band_size;
    for (Eigen::Index begin = 0, band = 0; begin < bins; begin += band_size, ++band) {
        const auto count = static_cast<std::size_t>(std::min(band_size, bins - begin));
        const auto offset = static_cast<std::size_t>(begin);
        const Eigen::Index h = argmax(hist_amplitudes.subspan(offset, count));
        const Eigen::Index t = argmax(truth_amplitudes.subspan(offset, count));
        if (h != t) continue;
        out.components.push_back({band, begin + h, hist_amplitudes[offset + static_cast<std::size_t>(h)],
                                  truth_amplitudes[offset + static_cast<std::size_t>(t)]});
    }
    return out;
}

KeyComponentSet detect_key_components(const Spectrum& hist, const Spectrum& truth, Eigen::Index band_size,
                                      Eigen::Index channel) {
    require(hist.bins() == truth.bins() && hist.channels() == truth.channels(), ErrorKind::ShapeMismatch,
            "historical and truth spectra differ in shape");
    require(channel >= 0 && channel < hist.channels(), ErrorKind::InvalidArgument,
            "channel " + std::to_string(channel) + " out of range");
    const Vector h = hist.amplitudes(channel);
    const Vector t = truth.amplitudes(channel);
    return detect_key_components(std::span<const double>(h.data(), static_cast<std::size_t>(h.size())),
                                 std::span<const double>(t.data(), static_cast<std::size_t>(t.size())),
                                 band_size);
}

double relative_error(Complex pred, Complex truth) {
    const double ref = std::abs(truth);
    require(ref >= 1e-12, ErrorKind::UndefinedReference,
            "relative error undefined: reference amplitude is zero");
    return std::abs(pred - truth) / ref;
}

double relative_error(const Spectrum& pred, const Spectrum& truth, Eigen::Index bin, Eigen::Index channel) {
    require(pred.bins() == truth.bins() && pred.channels() == truth.channels(), ErrorKind::ShapeMismatch,
            "relative_error: spectra differ in shape");
    require(bin >= 0 && bin < truth.bins(), ErrorKind::InvalidArgument,
            "bin " + std::to_string(bin) + " out of range");
    require(channel >= 0 && channel < truth.channels(), ErrorKind::InvalidArgument,
            "channel " + std::to_string(channel) + " out of range");
    return relative_error(pred.at(channel, bin), truth.at(channel, bin));
}

std::vector<double> amplitude_proportions(const KeyComponentSet& set) {
    require(!set.empty(), ErrorKind::EmptyInput, "amplitude proportion of an empty key-component set");
    double total = 0.0;
    for (const auto& c : set.components) total += c.hist_amplitude;
    require(total > 0.0, ErrorKind::UndefinedReference, "key components have zero total amplitude");
    std::vector<double> out;
    out.reserve(set.size());
    for (const auto& c : set.components) out.push_back(c.hist_amplitude / total);
    return out;
}

double amplitude_proportion(const KeyComponentSet& set, std::size_t index) {
    require(index < set.size() || set.empty(), ErrorKind::InvalidArgument,
            "component index " + std::to_string(index) + " out of range");
    return amplitude_proportions(set)[index];
}

double spectral_energy(std::span<const double> x) {
    check_finite(x);
    return std::transform_reduce(x.begin(), x.end(), 0.0, std::plus<>{}, [](double v) { return v * v; });
}

double half_spectrum_energy(std::span<const Complex> spectrum, std::size_t length) {
    double acc = 0.0;
    for (std::size_t k = 0; k < spectrum.size(); ++k) acc += (k == 0 ? 1.0 : 2.0) * std::norm(spectrum[k]);
    return static_cast<double>(length) * acc;
}

}  // namespace fredformer
