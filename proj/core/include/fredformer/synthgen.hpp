#pragma once

#include "fredformer/series.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fredformer {

/// Planted multi-sine signal. `bins` are frequency indices relative to the
/// full `length` (bin k completes k cycles over the whole series).
struct PlantConfig {
    Eigen::Index length = 10000;
    std::vector<Eigen::Index> bins;
    std::vector<double> amplitudes;
    /// Unset means 0.1 x the smallest amplitude.
    std::optional<double> noise_std;
    std::uint64_t seed = 0;
    /// Channels beyond the first carry the same bins with per-channel gain in
    /// [0.5, 1.5) and phase jitter, plus independent noise.
    Eigen::Index channels = 1;

    double resolved_noise_std() const;
    void validate() const;
};

/// Three-component configuration used for the bias case study.
PlantConfig case1_config(std::vector<Eigen::Index> bins, std::vector<double> amplitudes,
                         std::uint64_t seed = 0, Eigen::Index length = 10000);

struct GeneratedSeries {
    MultivariateSeries series;
    Matrix phases;  // channels x components, radians in [0, 2*pi)
};

/// x_l = sum_j A_j cos(2*pi*k_j*l/length + phi_j) + eps_l
GeneratedSeries gen_planted(const PlantConfig& config);

/// gen_planted restricted to exactly three components.
GeneratedSeries gen_case1(const PlantConfig& config);

/// gen_planted restricted to exactly four components.
GeneratedSeries gen_case2_like(const PlantConfig& config);

struct RearrangeReport {
    std::vector<Eigen::Index> selected_bins;
    std::vector<Eigen::Index> destination_bins;  // positions in the output spectrum
    std::vector<int> part_order;                 // output part i comes from input part part_order[i]
    Eigen::Index length = 0;
    double max_imag_residue = 0.0;

    std::string to_json() const;
    static RearrangeReport from_json(const std::string& text);
};

struct RearrangeResult {
    MultivariateSeries series;
    RearrangeReport report;
};

/// Moves the four most prominent low-frequency bins into the middle of the
/// spectrum and rotates the three spectral parts (first part to the end).
/// The coefficient map is a permutation, so energy is preserved exactly.
RearrangeResult rearrange_spectrum_mid(const MultivariateSeries& data);

/// Applies the inverse permutation recorded in `report`.
MultivariateSeries restore_spectrum_mid(const MultivariateSeries& data, const RearrangeReport& report);

}  // namespace fredformer
