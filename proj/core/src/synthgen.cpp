#include "fredformer/synthgen.hpp"

#include "fredformer/error.hpp"
#include "fredformer/spectral.hpp"

#include <fftw3.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>

namespace fredformer {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// RAII wrapper over one FFTW complex transform of fixed length.
class ComplexFft {
public:
    ComplexFft(Eigen::Index length, int sign)
        : n_(static_cast<int>(length)),
          buf_(static_cast<std::complex<double>*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(length)))),
          plan_(fftw_plan_dft_1d(n_, reinterpret_cast<fftw_complex*>(buf_), reinterpret_cast<fftw_complex*>(buf_),
                                 sign, FFTW_ESTIMATE)) {
        require(buf_ != nullptr && plan_ != nullptr, ErrorKind::InvalidArgument, "fftw plan creation failed");
    }
    ~ComplexFft() {
        fftw_destroy_plan(plan_);
        fftw_free(buf_);
    }
    ComplexFft(const ComplexFft&) = delete;
    ComplexFft& operator=(const ComplexFft&) = delete;

    std::complex<double>* data() { return buf_; }
    void run() { fftw_execute(plan_); }

private:
    int n_;
    std::complex<double>* buf_;
    fftw_plan plan_;
};

struct Parts {
    Eigen::Index begin[3];
    Eigen::Index end[3];

    explicit Parts(Eigen::Index length) {
        const Eigen::Index bins = half_bins(length);
        const Eigen::Index per = (bins - 1) / 3;
        begin[0] = 1;
        end[0] = begin[1] = 1 + per;
        end[1] = begin[2] = 1 + 2 * per;
        end[2] = bins;
    }
    Eigen::Index size(int i) const { return end[i] - begin[i]; }
};

constexpr int kPartOrder[3] = {1, 2, 0};

// source[k] = input bin feeding output bin k, for k in [0, floor(T/2)].
std::vector<Eigen::Index> build_source_map(Eigen::Index length, const std::vector<Eigen::Index>& selected,
                                           const std::vector<Eigen::Index>& pre_destinations) {
    const Parts parts(length);
    std::vector<Eigen::Index> swapped(static_cast<std::size_t>(length / 2 + 1));
    std::iota(swapped.begin(), swapped.end(), Eigen::Index{0});
    for (std::size_t i = 0; i < selected.size(); ++i) {
        std::swap(swapped[static_cast<std::size_t>(selected[i])],
                  swapped[static_cast<std::size_t>(pre_destinations[i])]);
    }
    std::vector<Eigen::Index> source = swapped;
    Eigen::Index out = 1;
    for (int part : kPartOrder) {
        for (Eigen::Index k = parts.begin[part]; k < parts.end[part]; ++k) {
            source[static_cast<std::size_t>(out++)] = swapped[static_cast<std::size_t>(k)];
        }
    }
    return source;
}

// Output position of a bin that sat in input part 2 before rotation.
Eigen::Index rotated_position(const Parts& parts, Eigen::Index pre) {
    return 1 + parts.size(1) + (pre - parts.begin[2]);
}

// Applies `source` (defined on the non-negative half) to every channel with
// conjugate-symmetric completion and returns the real reconstruction.
Matrix permute_spectrum(const Matrix& values, const std::vector<Eigen::Index>& source, double& max_imag) {
    const Eigen::Index length = values.cols();
    ComplexFft fwd(length, FFTW_FORWARD);
    ComplexFft inv(length, FFTW_BACKWARD);
    Matrix out(values.rows(), length);
    max_imag = 0.0;
    const double scale = 1.0 / static_cast<double>(length);
    for (Eigen::Index c = 0; c < values.rows(); ++c) {
        for (Eigen::Index l = 0; l < length; ++l) fwd.data()[l] = values(c, l);
        fwd.run();
        std::complex<double>* dst = inv.data();
        for (Eigen::Index k = 0; k <= length / 2; ++k) dst[k] = fwd.data()[source[static_cast<std::size_t>(k)]];
        for (Eigen::Index k = length / 2 + 1; k < length; ++k) dst[k] = std::conj(dst[length - k]);
        inv.run();
        for (Eigen::Index l = 0; l < length; ++l) {
            out(c, l) = dst[l].real() * scale;
            max_imag = std::max(max_imag, std::abs(dst[l].imag() * scale));
        }
    }
    return out;
}

Vector mean_amplitudes(const Matrix& values) {
    const Eigen::Index length = values.cols();
    ComplexFft fwd(length, FFTW_FORWARD);
    Vector acc = Vector::Zero(length / 2 + 1);
    for (Eigen::Index c = 0; c < values.rows(); ++c) {
        for (Eigen::Index l = 0; l < length; ++l) fwd.data()[l] = values(c, l);
        fwd.run();
        for (Eigen::Index k = 0; k <= length / 2; ++k) acc[k] += std::abs(fwd.data()[k]);
    }
    return acc / static_cast<double>(values.rows() * length);
}

// Bins of [begin, end) ordered by amplitude (descending when `largest`),
// ties to the lowest bin; the first `count` are returned sorted by bin.
std::vector<Eigen::Index> pick_bins(const Vector& amp, Eigen::Index begin, Eigen::Index end, std::size_t count,
                                    bool largest) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(end - begin));
    std::iota(idx.begin(), idx.end(), begin);
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
        return largest ? amp[a] > amp[b] : amp[a] < amp[b];
    });
    idx.resize(std::min(count, idx.size()));
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

double PlantConfig::resolved_noise_std() const {
    if (noise_std) return *noise_std;
    return amplitudes.empty() ? 0.0 : 0.1 * *std::min_element(amplitudes.begin(), amplitudes.end());
}

void PlantConfig::validate() const {
    require(length >= 2, ErrorKind::InvalidArgument, "plant length must be >= 2");
    require(channels >= 1, ErrorKind::InvalidArgument, "plant needs at least one channel");
    require(!bins.empty() && bins.size() == amplitudes.size(), ErrorKind::InvalidArgument,
            "plant needs one amplitude per bin");
    for (std::size_t j = 0; j < bins.size(); ++j) {
        require(bins[j] >= 1 && bins[j] < half_bins(length), ErrorKind::InvalidArgument,
                "planted bin " + std::to_string(bins[j]) + " outside [1, " + std::to_string(half_bins(length)) + ")");
        require(j == 0 || bins[j] > bins[j - 1], ErrorKind::InvalidArgument,
                "planted bins must be strictly increasing (collision at " + std::to_string(bins[j]) + ")");
        require(amplitudes[j] > 0.0 && std::isfinite(amplitudes[j]), ErrorKind::InvalidArgument,
                "planted amplitudes must be positive");
    }
    const double sigma = resolved_noise_std();
    require(sigma >= 0.0 && std::isfinite(sigma), ErrorKind::InvalidArgument, "noise_std must be >= 0");
}

PlantConfig case1_config(std::vector<Eigen::Index> bins, std::vector<double> amplitudes, std::uint64_t seed,
                         Eigen::Index length) {
    PlantConfig cfg;
    cfg.length = length;
    cfg.bins = std::move(bins);
    cfg.amplitudes = std::move(amplitudes);
    cfg.seed = seed;
    return cfg;
}

GeneratedSeries gen_planted(const PlantConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const auto components = static_cast<Eigen::Index>(config.bins.size());
    GeneratedSeries out;
    out.phases.resize(config.channels, components);
    Matrix gains = Matrix::Ones(config.channels, components);
    for (Eigen::Index j = 0; j < components; ++j) out.phases(0, j) = kTwoPi * unit(rng);
    for (Eigen::Index c = 1; c < config.channels; ++c) {
        for (Eigen::Index j = 0; j < components; ++j) {
            gains(c, j) = 0.5 + unit(rng);
            out.phases(c, j) = std::fmod(out.phases(0, j) + 0.5 * std::numbers::pi * (unit(rng) - 0.5) + kTwoPi, kTwoPi);
        }
    }

    Matrix values = Matrix::Zero(config.channels, config.length);
    for (Eigen::Index c = 0; c < config.channels; ++c) {
        for (Eigen::Index j = 0; j < components; ++j) {
            const Eigen::Index k = config.bins[static_cast<std::size_t>(j)];
            const double amp = config.amplitudes[static_cast<std::size_t>(j)] * gains(c, j);
            for (Eigen::Index l = 0; l < config.length; ++l) {
                const double angle = kTwoPi * static_cast<double>((k * l) % config.length) /
                                     static_cast<double>(config.length);
                values(c, l) += amp * std::cos(angle + out.phases(c, j));
            }
        }
    }

    const double sigma = config.resolved_noise_std();
    if (sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, sigma);
        for (Eigen::Index c = 0; c < config.channels; ++c) {
            for (Eigen::Index l = 0; l < config.length; ++l) values(c, l) += noise(rng);
        }
    }
    out.series = make_series(std::move(values));
    return out;
}

GeneratedSeries gen_case1(const PlantConfig& config) {
    require(config.bins.size() == 3, ErrorKind::InvalidArgument, "case 1 plants exactly three components");
    return gen_planted(config);
}

GeneratedSeries gen_case2_like(const PlantConfig& config) {
    require(config.bins.size() == 4, ErrorKind::InvalidArgument, "case 2 plants exactly four components");
    return gen_planted(config);
}

RearrangeResult rearrange_spectrum_mid(const MultivariateSeries& data) {
    data.validate();
    const Eigen::Index length = data.length();
    require(length >= 12, ErrorKind::InvalidArgument,
            "spectrum rearrangement needs at least 12 time steps, got " + std::to_string(length));

    const Parts parts(length);
    const Vector amp = mean_amplitudes(data.values);
    const std::size_t count = static_cast<std::size_t>(std::min<Eigen::Index>(4, parts.size(0)));
    const auto selected = pick_bins(amp, parts.begin[0], parts.end[0], count, true);
    const auto pre_dest = pick_bins(amp, parts.begin[2], parts.begin[2] + parts.size(1), count, false);

    RearrangeResult out;
    out.report.selected_bins = selected;
    for (Eigen::Index d : pre_dest) out.report.destination_bins.push_back(rotated_position(parts, d));
    out.report.part_order.assign(std::begin(kPartOrder), std::end(kPartOrder));
    out.report.length = length;

    const auto source = build_source_map(length, selected, pre_dest);
    out.series = data;
    out.series.values = permute_spectrum(data.values, source, out.report.max_imag_residue);
    return out;
}

MultivariateSeries restore_spectrum_mid(const MultivariateSeries& data, const RearrangeReport& report) {
    data.validate();
    require(report.length == data.length(), ErrorKind::ShapeMismatch, "report length does not match series");
    require(report.selected_bins.size() == report.destination_bins.size(), ErrorKind::InvalidArgument,
            "report selected/destination size mismatch");
    const Parts parts(data.length());
    std::vector<Eigen::Index> pre_dest;
    for (Eigen::Index d : report.destination_bins) pre_dest.push_back(d - 1 - parts.size(1) + parts.begin[2]);

    const auto source = build_source_map(data.length(), report.selected_bins, pre_dest);
    std::vector<Eigen::Index> inverse(source.size());
    for (std::size_t k = 0; k < source.size(); ++k) inverse[static_cast<std::size_t>(source[k])] = static_cast<Eigen::Index>(k);

    double residue = 0.0;
    MultivariateSeries out = data;
    out.values = permute_spectrum(data.values, inverse, residue);
    return out;
}

std::string RearrangeReport::to_json() const {
    nlohmann::json j;
    j["selected_bins"] = selected_bins;
    j["destination_bins"] = destination_bins;
    j["part_order"] = part_order;
    j["length"] = length;
    j["max_imag_residue"] = max_imag_residue;
    return j.dump(2);
}

RearrangeReport RearrangeReport::from_json(const std::string& text) {
    RearrangeReport r;
    try {
        const auto j = nlohmann::json::parse(text);
        r.selected_bins = j.at("selected_bins").get<std::vector<Eigen::Index>>();
        r.destination_bins = j.at("destination_bins").get<std::vector<Eigen::Index>>();
        r.part_order = j.at("part_order").get<std::vector<int>>();
        r.length = j.at("length").get<Eigen::Index>();
        r.max_imag_residue = j.value("max_imag_residue", 0.0);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("rearrange report: ") + e.what());
    }
    return r;
}

}  // namespace fredformer
