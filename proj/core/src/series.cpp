#include "fredformer/series.hpp"

#include "fredformer/error.hpp"

namespace fredformer {

MultivariateSeries MultivariateSeries::slice(Eigen::Index begin, Eigen::Index count) const {
    require(begin >= 0 && count >= 0 && begin + count <= length(), ErrorKind::InvalidArgument,
            "slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                ") out of range for length " + std::to_string(length()));
    MultivariateSeries out;
    out.values = values.middleCols(begin, count);
    out.channel_names = channel_names;
    if (timestamps) {
        out.timestamps.emplace(timestamps->begin() + begin, timestamps->begin() + begin + count);
    }
    return out;
}

void MultivariateSeries::validate() const {
    require(channels() >= 1, ErrorKind::ShapeMismatch, "series needs at least one channel");
    require(length() >= 2, ErrorKind::ShapeMismatch,
            "series needs at least two time steps, got " + std::to_string(length()));
    require(channel_names.empty() || static_cast<Eigen::Index>(channel_names.size()) == channels(),
            ErrorKind::ShapeMismatch,
            "channel_names has " + std::to_string(channel_names.size()) + " entries for " +
                std::to_string(channels()) + " channels");
    require(!timestamps || static_cast<Eigen::Index>(timestamps->size()) == length(),
            ErrorKind::ShapeMismatch, "timestamp count does not match series length");
    require(values.allFinite(), ErrorKind::NonFinite, "series contains non-finite values");
}

MultivariateSeries make_series(Matrix values) {
    MultivariateSeries s;
    s.channel_names.reserve(static_cast<std::size_t>(values.rows()));
    for (Eigen::Index c = 0; c < values.rows(); ++c) s.channel_names.push_back("ch" + std::to_string(c));
    s.values = std::move(values);
    return s;
}

}  // namespace fredformer
