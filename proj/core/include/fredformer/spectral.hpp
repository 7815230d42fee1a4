#pragma once

#include "fredformer/series.hpp"

#include <complex>
#include <span>
#include <vector>

namespace fredformer {

using Complex = std::complex<double>;

/// Number of stored half-spectrum bins for a real signal of length L:
/// bins 0..floor(L/2)-1, DC kept, Nyquist dropped.
constexpr Eigen::Index half_bins(Eigen::Index length) { return length / 2; }

/// a_k = (1/L) * sum_l x_l * exp(-i*2*pi*k*l/L) for k in [0, floor(L/2)).
std::vector<Complex> dft(std::span<const double> x);

/// Inverse of `dft` by conjugate-symmetric completion; the Nyquist bin is
/// taken as zero and the imaginary part of the DC bin is ignored.
std::vector<double> idft(std::span<const Complex> spectrum, std::size_t length);

/// Precomputed twiddle tables for one transform length. Operates on row-major
/// batches: each row of the input is one signal.
class DftPlan {
public:
    explicit DftPlan(Eigen::Index length);

    Eigen::Index length() const { return length_; }
    Eigen::Index bins() const { return cos_.cols(); }

    /// rows x L  ->  (rows x F real, rows x F imag)
    void forward(const Matrix& signals, Matrix& real_part, Matrix& imag_part) const;

    /// (rows x F real, rows x F imag)  ->  rows x L
    Matrix inverse(const Matrix& real_part, const Matrix& imag_part) const;

    /// Adjoint of `inverse`: maps a gradient w.r.t. the signals onto the
    /// real and imaginary coefficients.
    void inverse_adjoint(const Matrix& grad_signals, Matrix& grad_real, Matrix& grad_imag) const;

private:
    Eigen::Index length_;
    Matrix cos_;  // L x F, cos(2*pi*k*l/L)
    Matrix sin_;  // L x F, sin(2*pi*k*l/L)
    Matrix inv_cos_;  // F x L, symmetric-completion weights for the real part
    Matrix inv_sin_;  // F x L, same for the imaginary part (already negated)
};

struct Spectrum {
    Matrix real_part;  // C x F
    Matrix imag_part;  // C x F
    Eigen::Index origin_length = 0;

    Eigen::Index channels() const { return real_part.rows(); }
    Eigen::Index bins() const { return real_part.cols(); }
    Complex at(Eigen::Index channel, Eigen::Index bin) const {
        return {real_part(channel, bin), imag_part(channel, bin)};
    }
    /// |a_k| for every bin of one channel.
    Vector amplitudes(Eigen::Index channel) const;

    void validate() const;
};

Spectrum spectrum_of(const MultivariateSeries& series);

/// Time-domain reconstruction of every channel (length = origin_length).
Matrix reconstruct(const Spectrum& spectrum);

struct KeyComponent {
    Eigen::Index band_index = 0;
    Eigen::Index bin_index = 0;
    double hist_amplitude = 0.0;
    double truth_amplitude = 0.0;
};

struct KeyComponentSet {
    std::vector<KeyComponent> components;
    Eigen::Index band_size = 1;

    bool empty() const { return components.empty(); }
    std::size_t size() const { return components.size(); }
    std::vector<Eigen::Index> bins() const;
};

/// A bin is key when it is the within-band amplitude argmax of both the
/// historical and the ground-truth amplitude spectra. Ties resolve to the
/// lowest bin. The last band may be shorter than `band_size`.
KeyComponentSet detect_key_components(std::span<const double> hist_amplitudes,
                                      std::span<const double> truth_amplitudes,
                                      Eigen::Index band_size);

KeyComponentSet detect_key_components(const Spectrum& hist, const Spectrum& truth,
                                      Eigen::Index band_size, Eigen::Index channel);

/// |pred_k - truth_k| / |truth_k| for one channel. Throws
/// ErrorKind::UndefinedReference when |truth_k| < 1e-12.
double relative_error(const Spectrum& pred, const Spectrum& truth, Eigen::Index bin,
                      Eigen::Index channel);
double relative_error(Complex pred, Complex truth);

/// P(a_i) = |a_i| / sum_n |a_n| over the set, using the historical amplitudes.
double amplitude_proportion(const KeyComponentSet& set, std::size_t index);
std::vector<double> amplitude_proportions(const KeyComponentSet& set);

/// sum_l |x_l|^2
double spectral_energy(std::span<const double> x);

/// Time-domain energy implied by a half spectrum of a length-L real signal:
/// L * (|a_0|^2 + 2 * sum_{k>=1} |a_k|^2). Equals spectral_energy(x) whenever
/// x carries no energy in the dropped Nyquist bin.
double half_spectrum_energy(std::span<const Complex> spectrum, std::size_t length);

}  // namespace fredformer
