#pragma once

#include "fredformer/train.hpp"

#include <filesystem>
#include <vector>

namespace fredformer::cli {

/// `epoch,<bin>,<bin>,...` with one row per epoch, numbered from 1.
void write_trace_csv(const std::filesystem::path& path, const BiasTrace& trace,
                     const std::vector<Eigen::Index>& epochs = {});

struct TraceTable {
    std::vector<Eigen::Index> epochs;
    BiasTrace trace;
};

/// Reads a trace written by write_trace_csv. Empty traces (no rows or no
/// component columns) are rejected.
TraceTable read_trace_csv(const std::filesystem::path& path);

/// `epoch,train_loss,val_loss`
void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochLog>& history);

}  // namespace fredformer::cli
