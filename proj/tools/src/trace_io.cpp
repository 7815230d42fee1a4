#include "trace_io.hpp"

#include "fredformer/data.hpp"
#include "fredformer/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace fredformer::cli {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
    return out;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

template <class T>
T parse_number(const std::string& text, const std::filesystem::path& path, std::size_t row) {
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    require(ec == std::errc() && ptr == end, ErrorKind::Parse,
            path.string() + ": row " + std::to_string(row) + ": not a number: '" + text + "'");
    return value;
}

}  // namespace

void write_trace_csv(const std::filesystem::path& path, const BiasTrace& trace,
                     const std::vector<Eigen::Index>& epochs) {
    auto out = open_out(path);
    out << "epoch";
    for (const auto bin : trace.component_bins) out << ',' << bin;
    out << '\n';
    for (std::size_t r = 0; r < trace.rows.size(); ++r) {
        out << (epochs.empty() ? static_cast<Eigen::Index>(r + 1) : epochs.at(r));
        for (const double v : trace.rows[r]) out << ',' << format_double(v);
        out << '\n';
    }
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
}

TraceTable read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open trace file " + path.string());

    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::EmptyInput, "empty trace file " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_fields(line);
    require(!header.empty() && header[0] == "epoch", ErrorKind::Parse,
            path.string() + ": header must start with 'epoch'");

    TraceTable table;
    for (std::size_t c = 1; c < header.size(); ++c) {
        table.trace.component_bins.push_back(parse_number<Eigen::Index>(header[c], path, 1));
    }
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        require(fields.size() == header.size(), ErrorKind::Parse,
                path.string() + ": row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                    " fields, expected " + std::to_string(header.size()));
        table.epochs.push_back(parse_number<Eigen::Index>(fields[0], path, row));
        std::vector<double> values;
        for (std::size_t c = 1; c < fields.size(); ++c) values.push_back(parse_number<double>(fields[c], path, row));
        table.trace.rows.push_back(std::move(values));
    }
    require(table.trace.components() > 0 && table.trace.epochs() > 0, ErrorKind::EmptyInput,
            "trace " + path.string() + " is empty");
    return table;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochLog>& history) {
    auto out = open_out(path);
    out << "epoch,train_loss,val_loss\n";
    for (const auto& h : history) {
        out << h.epoch << ',' << format_double(h.train_loss) << ',' << format_double(h.val_loss) << '\n';
    }
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
}

}  // namespace fredformer::cli
