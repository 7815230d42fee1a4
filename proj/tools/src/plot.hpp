#pragma once

#include "fredformer/series.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace fredformer::cli {

struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

    Image(int w, int h);
    void set(int x, int y, std::array<std::uint8_t, 3> color);
};

/// Epochs run down the rows, components across the columns. Values are
/// mapped onto a dark-to-bright ramp over [0, max(1, max value)].
Image render_heatmap(const Matrix& values);

/// Overlaid polylines, one per column of `curves` (rows are bins), on a
/// shared linear amplitude axis.
Image render_lines(const Matrix& curves);

/// Writes `stem` + ".png" when built with libpng, ".ppm" otherwise.
/// Returns the path written.
std::filesystem::path write_image(const std::filesystem::path& stem, const Image& image);

}  // namespace fredformer::cli
