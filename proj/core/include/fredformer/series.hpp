#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace fredformer {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// C-channel real-valued series stored channel-major (C rows, T columns).
///
/// Timestamps are opaque labels carried through I/O; they are never parsed.
struct MultivariateSeries {
    Matrix values;
    std::vector<std::string> channel_names;
    std::optional<std::vector<std::string>> timestamps;

    Eigen::Index channels() const { return values.rows(); }
    Eigen::Index length() const { return values.cols(); }

    /// Columns [begin, begin + count), timestamps sliced alongside.
    MultivariateSeries slice(Eigen::Index begin, Eigen::Index count) const;

    /// Throws Error if C < 1, T < 2, a value is non-finite, or the names or
    /// timestamps disagree with the matrix shape.
    void validate() const;
};

/// Builds a series with default channel names ("ch0", "ch1", ...).
MultivariateSeries make_series(Matrix values);

}  // namespace fredformer
