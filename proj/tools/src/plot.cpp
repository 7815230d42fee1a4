#include "plot.hpp"

#include "fredformer/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#ifdef FREDFORMER_HAVE_PNG
#include <png.h>
#endif

namespace fredformer::cli {

using Rgb = std::array<std::uint8_t, 3>;

Image::Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 255) {}

void Image::set(int x, int y, Rgb color) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    const auto at = (static_cast<std::size_t>(y) * width + x) * 3;
    std::copy(color.begin(), color.end(), rgb.begin() + static_cast<std::ptrdiff_t>(at));
}

namespace {

Rgb ramp(double t) {
    // piecewise-linear approximation of a perceptual dark-blue to yellow map
    static constexpr std::array<Rgb, 5> stops{{{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
    t = std::clamp(t, 0.0, 1.0) * (stops.size() - 1);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(t), stops.size() - 2);
    const double f = t - static_cast<double>(i);
    Rgb out{};
    for (std::size_t c = 0; c < 3; ++c) {
        out[c] = static_cast<std::uint8_t>(std::lround((1 - f) * stops[i][c] + f * stops[i + 1][c]));
    }
    return out;
}

void line(Image& img, int x0, int y0, int x1, int y1, Rgb color) {
    const int dx = std::abs(x1 - x0);
    const int dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1;
    const int sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        img.set(x0, y0, color);
        img.set(x0, y0 + 1, color);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) { err += dy; x0 += sx; }
        if (e2 <= dx) { err += dx; y0 += sy; }
    }
}

}  // namespace

Image render_heatmap(const Matrix& values) {
    require(values.size() > 0, ErrorKind::EmptyInput, "nothing to plot");
    const int cols = static_cast<int>(values.cols());
    const int rows = static_cast<int>(values.rows());
    const int cell_w = std::max(8, 480 / cols);
    const int cell_h = std::max(2, 400 / rows);
    const double top = std::max(1.0, values.maxCoeff());

    Image img(cols * cell_w, rows * cell_h);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const Rgb color = ramp(values(r, c) / top);
            for (int y = r * cell_h; y < (r + 1) * cell_h; ++y)
                for (int x = c * cell_w; x < (c + 1) * cell_w; ++x) img.set(x, y, color);
        }
    }
    return img;
}

Image render_lines(const Matrix& curves) {
    require(curves.rows() >= 2 && curves.cols() >= 1, ErrorKind::EmptyInput, "nothing to plot");
    static constexpr std::array<Rgb, 4> palette{{{120, 120, 120}, {214, 39, 40}, {31, 119, 180}, {44, 160, 44}}};
    constexpr int width = 720;
    constexpr int height = 360;
    constexpr int margin = 20;
    Image img(width, height);

    line(img, margin, height - margin, width - margin, height - margin, {0, 0, 0});
    line(img, margin, margin, margin, height - margin, {0, 0, 0});

    const double top = std::max(curves.maxCoeff(), 1e-12);
    const auto px = [&](Eigen::Index i) {
        return margin + static_cast<int>(std::lround(static_cast<double>(i) * (width - 2 * margin) /
                                                     static_cast<double>(curves.rows() - 1)));
    };
    const auto py = [&](double v) {
        return height - margin - static_cast<int>(std::lround(v / top * (height - 2 * margin)));
    };
    for (Eigen::Index c = 0; c < curves.cols(); ++c) {
        const Rgb color = palette[static_cast<std::size_t>(c) % palette.size()];
        for (Eigen::Index i = 1; i < curves.rows(); ++i) {
            line(img, px(i - 1), py(curves(i - 1, c)), px(i), py(curves(i, c)), color);
        }
    }
    return img;
}

std::filesystem::path write_image(const std::filesystem::path& stem, const Image& image) {
#ifdef FREDFORMER_HAVE_PNG
    auto path = stem;
    path += ".png";
    png_image desc{};
    desc.version = PNG_IMAGE_VERSION;
    desc.width = static_cast<png_uint_32>(image.width);
    desc.height = static_cast<png_uint_32>(image.height);
    desc.format = PNG_FORMAT_RGB;
    const int ok = png_image_write_to_file(&desc, path.c_str(), 0, image.rgb.data(), 0, nullptr);
    require(ok != 0, ErrorKind::Io, "cannot write " + path.string() + ": " + desc.message);
    return path;
#else
    auto path = stem;
    path += ".ppm";
    std::ofstream out(path, std::ios::binary);
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    return path;
#endif
}

}  // namespace fredformer::cli
