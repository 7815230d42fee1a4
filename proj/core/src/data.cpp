#include "fredformer/data.hpp"

#include "fredformer/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fredformer {
namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

bool parse_double(const std::string& text, double& out) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    if (begin != end && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

Eigen::Index floor_count(double fraction, Eigen::Index total) {
    return static_cast<Eigen::Index>(std::floor(fraction * static_cast<double>(total) + 1e-9));
}

}  // namespace

std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

MultivariateSeries load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, "cannot open '" + path.string() + "'");

    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::Parse, "'" + path.string() + "' is empty");
    std::vector<std::string> header = split_line(line);
    for (auto& h : header) h = trim(h);
    const bool has_date = !header.empty() && [&] {
        std::string first = header.front();
        std::transform(first.begin(), first.end(), first.begin(), [](unsigned char c) { return std::tolower(c); });
        return first == "date";
    }();
    const std::size_t first_value = has_date ? 1 : 0;
    require(header.size() > first_value, ErrorKind::Parse, "'" + path.string() + "' has no data columns");

    std::vector<std::vector<double>> rows;
    std::vector<std::string> stamps;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        require(cells.size() == header.size(), ErrorKind::Parse,
                path.string() + ": ragged row at line " + std::to_string(line_no) + " (" + std::to_string(cells.size()) +
                    " cells, header has " + std::to_string(header.size()) + ")");
        std::vector<double> row(header.size() - first_value);
        for (std::size_t j = first_value; j < cells.size(); ++j) {
            const std::string cell = trim(cells[j]);
            require(parse_double(cell, row[j - first_value]), ErrorKind::Parse,
                    path.string() + ": non-numeric value '" + cell + "' at row " + std::to_string(rows.size() + 1) +
                        " (line " + std::to_string(line_no) + "), column \"" + header[j] + "\"");
        }
        if (has_date) stamps.push_back(trim(cells[0]));
        rows.push_back(std::move(row));
    }
    require(rows.size() >= 2, ErrorKind::Parse,
            "'" + path.string() + "' needs at least 2 data rows, found " + std::to_string(rows.size()));

    MultivariateSeries out;
    const auto channels = static_cast<Eigen::Index>(header.size() - first_value);
    out.values.resize(channels, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) {
        for (Eigen::Index c = 0; c < channels; ++c) out.values(c, static_cast<Eigen::Index>(t)) = rows[t][static_cast<std::size_t>(c)];
    }
    out.channel_names.assign(header.begin() + static_cast<std::ptrdiff_t>(first_value), header.end());
    if (has_date) out.timestamps = std::move(stamps);
    out.validate();
    return out;
}

void write_csv(const std::filesystem::path& path, const MultivariateSeries& series) {
    series.validate();
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorKind::Io, "cannot write '" + path.string() + "'");
    out << "date";
    for (Eigen::Index c = 0; c < series.channels(); ++c) {
        out << ',' << (series.channel_names.empty() ? "ch" + std::to_string(c) : series.channel_names[static_cast<std::size_t>(c)]);
    }
    out << '\n';
    for (Eigen::Index t = 0; t < series.length(); ++t) {
        out << (series.timestamps ? (*series.timestamps)[static_cast<std::size_t>(t)] : std::to_string(t));
        for (Eigen::Index c = 0; c < series.channels(); ++c) out << ',' << format_double(series.values(c, t));
        out << '\n';
    }
    require(out.good(), ErrorKind::Io, "failed writing '" + path.string() + "'");
}

SplitScheme SplitScheme::ett_months(Eigen::Index steps_per_day) {
    SplitScheme s;
    s.kind = Kind::EttMonths;
    s.steps_per_day = steps_per_day;
    return s;
}

SplitScheme SplitScheme::ratio(double train, double val, double test) {
    require(train > 0 && val > 0 && test > 0 && std::abs(train + val + test - 1.0) < 1e-9, ErrorKind::InvalidArgument,
            "split ratios must be positive and sum to 1");
    SplitScheme s;
    s.kind = Kind::Ratio;
    s.train = train;
    s.val = val;
    s.test = test;
    return s;
}

SplitScheme SplitScheme::parse(const std::string& text) {
    if (text == "ett_h" || text == "ett_months") return ett_months(24);
    if (text == "ett_m") return ett_months(96);
    if (text == "ratio") return ratio();
    if (text.rfind("ratio:", 0) == 0) {
        std::array<double, 3> r{};
        std::istringstream in(text.substr(6));
        std::string cell;
        std::size_t i = 0;
        while (std::getline(in, cell, ',')) {
            require(i < 3 && parse_double(trim(cell), r[i]), ErrorKind::InvalidArgument, "bad split ratios '" + text + "'");
            ++i;
        }
        require(i == 3, ErrorKind::InvalidArgument, "split ratios need three values: '" + text + "'");
        return ratio(r[0], r[1], r[2]);
    }
    fail(ErrorKind::InvalidArgument, "unknown split scheme '" + text + "' (expected ett_h, ett_m, ratio or ratio:a,b,c)");
}

std::string SplitScheme::to_string() const {
    if (kind == Kind::EttMonths) return steps_per_day == 96 ? "ett_m" : "ett_h";
    return "ratio:" + format_double(train) + "," + format_double(val) + "," + format_double(test);
}

std::string to_string(SplitTag tag) {
    switch (tag) {
        case SplitTag::Train: return "train";
        case SplitTag::Val: return "val";
        case SplitTag::Test: return "test";
    }
    return "train";
}

SplitTag parse_split_tag(const std::string& text) {
    if (text == "train") return SplitTag::Train;
    if (text == "val") return SplitTag::Val;
    if (text == "test") return SplitTag::Test;
    fail(ErrorKind::InvalidArgument, "unknown split '" + text + "' (expected train, val or test)");
}

const SplitPart& Splits::get(SplitTag tag) const {
    return tag == SplitTag::Train ? train : tag == SplitTag::Val ? val : test;
}

Splits split(const MultivariateSeries& series, const SplitScheme& scheme, Eigen::Index lookback,
             Eigen::Index horizon) {
    series.validate();
    require(lookback >= 1 && horizon >= 1, ErrorKind::InvalidArgument, "lookback and horizon must be positive");
    const Eigen::Index total = series.length();
    Eigen::Index n_train = 0;
    Eigen::Index n_val = 0;
    Eigen::Index n_test = 0;
    if (scheme.kind == SplitScheme::Kind::EttMonths) {
        const Eigen::Index month = 30 * scheme.steps_per_day;
        n_train = 12 * month;
        n_val = 4 * month;
        n_test = 4 * month;
        require(total >= n_train + n_val + n_test, ErrorKind::InvalidArgument,
                "ETT month split needs " + std::to_string(n_train + n_val + n_test) + " rows, series has " +
                    std::to_string(total));
    } else {
        n_train = floor_count(scheme.train, total);
        n_test = floor_count(scheme.test, total);
        n_val = total - n_train - n_test;
    }

    Splits out;
    out.train = {series.slice(0, n_train), 0};
    const Eigen::Index val_border = std::min(lookback, n_train);
    out.val = {series.slice(n_train - val_border, n_val + val_border), val_border};
    const Eigen::Index test_border = std::min(lookback, n_train + n_val);
    out.test = {series.slice(n_train + n_val - test_border, n_test + test_border), test_border};

    for (SplitTag tag : {SplitTag::Train, SplitTag::Val, SplitTag::Test}) {
        const auto len = out.get(tag).series.length();
        require(len >= lookback + horizon, ErrorKind::InvalidArgument,
                to_string(tag) + " split has " + std::to_string(len) + " rows, fewer than lookback + horizon = " +
                    std::to_string(lookback + horizon));
    }
    return out;
}

Scaler Scaler::fit(const Matrix& values) {
    require(values.cols() >= 1, ErrorKind::EmptyInput, "cannot fit a scaler on an empty split");
    Scaler s;
    s.mean = values.rowwise().mean();
    s.stddev = ((values.colwise() - s.mean).array().square().rowwise().mean()).sqrt();
    for (Eigen::Index c = 0; c < s.stddev.size(); ++c) {
        if (!(s.stddev[c] > 1e-12)) {
            s.stddev[c] = 1.0;
            s.clamped_channels.push_back(c);
        }
    }
    return s;
}

Matrix Scaler::transform(const Matrix& values) const {
    require(values.rows() == mean.size(), ErrorKind::ShapeMismatch, "scaler channel count mismatch");
    Matrix out = values.colwise() - mean;
    out.array().colwise() /= stddev.array();
    return out;
}

Matrix Scaler::inverse(const Matrix& values) const {
    require(values.rows() == mean.size(), ErrorKind::ShapeMismatch, "scaler channel count mismatch");
    Matrix out = values.array().colwise() * stddev.array();
    out.colwise() += mean;
    return out;
}

WindowedDataset::WindowedDataset(Matrix values, Eigen::Index lookback, Eigen::Index horizon, Eigen::Index stride,
                                 SplitTag tag)
    : values_(std::move(values)), lookback_(lookback), horizon_(horizon), stride_(stride), tag_(tag) {
    require(lookback >= 1 && horizon >= 1 && stride >= 1, ErrorKind::InvalidArgument,
            "lookback, horizon and stride must be positive");
    const Eigen::Index span = values_.cols() - lookback - horizon;
    require(span >= 0, ErrorKind::InvalidArgument,
            "series of length " + std::to_string(values_.cols()) + " is shorter than lookback + horizon = " +
                std::to_string(lookback + horizon));
    count_ = span / stride + 1;
}

Matrix WindowedDataset::lookback_window(Eigen::Index i) const {
    require(i >= 0 && i < count_, ErrorKind::InvalidArgument, "window index out of range");
    return values_.middleCols(i * stride_, lookback_);
}

Matrix WindowedDataset::target_window(Eigen::Index i) const {
    require(i >= 0 && i < count_, ErrorKind::InvalidArgument, "window index out of range");
    return values_.middleCols(i * stride_ + lookback_, horizon_);
}

void WindowedDataset::gather(std::span<const Eigen::Index> indices, Matrix& inputs, Matrix& targets) const {
    const Eigen::Index c = channels();
    const auto batch = static_cast<Eigen::Index>(indices.size());
    inputs.resize(batch * c, lookback_);
    targets.resize(batch * c, horizon_);
    for (Eigen::Index b = 0; b < batch; ++b) {
        const Eigen::Index i = indices[static_cast<std::size_t>(b)];
        require(i >= 0 && i < count_, ErrorKind::InvalidArgument, "window index out of range");
        inputs.middleRows(b * c, c) = values_.middleCols(i * stride_, lookback_);
        targets.middleRows(b * c, c) = values_.middleCols(i * stride_ + lookback_, horizon_);
    }
}

WindowedDataset WindowedDataset::head(Eigen::Index count) const {
    const Eigen::Index n = std::clamp<Eigen::Index>(count, 1, count_);
    WindowedDataset out(values_.leftCols((n - 1) * stride_ + lookback_ + horizon_), lookback_, horizon_, stride_, tag_);
    out.scaler_ = scaler_;
    return out;
}

WindowedDataset window(const MultivariateSeries& series, Eigen::Index lookback, Eigen::Index horizon,
                       Eigen::Index stride, SplitTag tag) {
    series.validate();
    return WindowedDataset(series.values, lookback, horizon, stride, tag);
}

WindowedDataset standardize(const WindowedDataset& dataset, const Scaler& scaler) {
    WindowedDataset out = dataset;
    out.values_ = scaler.transform(dataset.values_);
    out.scaler_ = scaler;
    return out;
}

const WindowedDataset& PreparedData::get(SplitTag tag) const {
    return tag == SplitTag::Train ? train : tag == SplitTag::Val ? val : test;
}

PreparedData prepare(const MultivariateSeries& series, const SplitScheme& scheme, Eigen::Index lookback,
                     Eigen::Index horizon, Eigen::Index train_stride, bool standardized) {
    const Splits parts = split(series, scheme, lookback, horizon);
    PreparedData out;
    out.scaler = Scaler::fit(parts.train.series.values);
    out.train = window(parts.train.series, lookback, horizon, train_stride, SplitTag::Train);
    out.val = window(parts.val.series, lookback, horizon, 1, SplitTag::Val);
    out.test = window(parts.test.series, lookback, horizon, 1, SplitTag::Test);
    if (standardized) {
        out.train = standardize(out.train, out.scaler);
        out.val = standardize(out.val, out.scaler);
        out.test = standardize(out.test, out.scaler);
    }
    return out;
}

}  // namespace fredformer
