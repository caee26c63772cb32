#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace icl {

struct Axis {
    std::string name;
    std::vector<std::string> labels;
};

/// Dense grid of real values over named axes, serialized as long-format CSV:
/// one row per cell, the axis labels followed by the value. Rows come out in
/// lexicographic order over axis positions; missing cells print as "NA".
class ResultTable {
public:
    ResultTable() = default;
    ResultTable(std::string metric_name, std::vector<Axis> axes);

    const std::string& metric_name() const { return metric_name_; }
    const std::vector<Axis>& axes() const { return axes_; }
    std::size_t size() const { return cells_.size(); }

    void set(const std::vector<std::size_t>& index, double value);
    std::optional<double> get(const std::vector<std::size_t>& index) const;
    // Lookup by axis labels; throws when a label is unknown.
    std::optional<double> at(const std::vector<std::string>& labels) const;

    nlohmann::json& metadata() { return metadata_; }
    const nlohmann::json& metadata() const { return metadata_; }

    std::string to_csv() const;

private:
    std::size_t flat_index(const std::vector<std::size_t>& index) const;

    std::string metric_name_;
    std::vector<Axis> axes_;
    std::vector<std::optional<double>> cells_;
    nlohmann::json metadata_ = nlohmann::json::object();
};

// Shortest round-trip decimal representation.
std::string format_number(double value);

}  // namespace icl
