#include "icl/result_table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "icl/errors.hpp"

namespace icl {

std::string format_number(double value) {
    if (std::isnan(value)) return "NA";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

ResultTable::ResultTable(std::string metric_name, std::vector<Axis> axes)
    : metric_name_(std::move(metric_name)), axes_(std::move(axes)) {
    std::size_t n = 1;
    for (const Axis& a : axes_) {
        if (a.labels.empty()) throw InvalidArgument("result axis '" + a.name + "' has no labels");
        n *= a.labels.size();
    }
    cells_.assign(n, std::nullopt);
}

std::size_t ResultTable::flat_index(const std::vector<std::size_t>& index) const {
    if (index.size() != axes_.size()) throw InvalidArgument("result index has wrong rank");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < axes_.size(); ++k) {
        if (index[k] >= axes_[k].labels.size()) throw InvalidArgument("result index out of range");
        flat = flat * axes_[k].labels.size() + index[k];
    }
    return flat;
}

void ResultTable::set(const std::vector<std::size_t>& index, double value) {
    cells_[flat_index(index)] = std::isfinite(value) ? std::optional<double>(value) : std::nullopt;
}

std::optional<double> ResultTable::get(const std::vector<std::size_t>& index) const {
    return cells_[flat_index(index)];
}

std::optional<double> ResultTable::at(const std::vector<std::string>& labels) const {
    if (labels.size() != axes_.size()) throw InvalidArgument("result lookup has wrong rank");
    std::vector<std::size_t> index;
    for (std::size_t k = 0; k < axes_.size(); ++k) {
        const auto& l = axes_[k].labels;
        const auto it = std::find(l.begin(), l.end(), labels[k]);
        if (it == l.end()) throw InvalidArgument("unknown label '" + labels[k] + "'");
        index.push_back(static_cast<std::size_t>(it - l.begin()));
    }
    return get(index);
}

std::string ResultTable::to_csv() const {
    std::ostringstream out;
    for (const Axis& a : axes_) out << a.name << ',';
    out << "value\n";
    std::vector<std::size_t> index(axes_.size(), 0);
    for (std::size_t flat = 0; flat < cells_.size(); ++flat) {
        std::size_t rest = flat;
        for (std::size_t k = axes_.size(); k-- > 0;) {
            index[k] = rest % axes_[k].labels.size();
            rest /= axes_[k].labels.size();
        }
        for (std::size_t k = 0; k < axes_.size(); ++k) out << axes_[k].labels[index[k]] << ',';
        out << (cells_[flat] ? format_number(*cells_[flat]) : std::string("NA")) << '\n';
    }
    return out.str();
}

}  // namespace icl
